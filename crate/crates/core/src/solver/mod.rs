//! Time integration of the advection-diffusion and transport equations.
//!
//! * `κ > 0`: integrating-factor RK4 in Fourier space with the 2/3 rule;
//!   diffusion is applied exactly through `e^{−4π²κ|k|²dt}`.
//! * `κ = 0`: semi-Lagrangian transport (RK4 backtrace, bicubic
//!   interpolation), or the same spectral scheme with `κ = 0`.

mod engine;
pub mod semi_lagrangian;
mod series;

use serde::{Deserialize, Serialize};

pub use series::{
    energy_identity_residual, lq_identity_residual, DiagnosticRecord, SimulationSeries, CSV_HEADER,
};

use crate::flow::VelocityProtocol;
use crate::spectral::fft::check_resolution;
use crate::spectral::{project_mean_zero, ScalarField};
use crate::{Error, Result};
use engine::SpectralEngine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    IntegratingFactorRk4,
    SemiLagrangian,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::IntegratingFactorRk4 => "integrating-factor-rk4",
            Scheme::SemiLagrangian => "semi-lagrangian",
        }
    }
}

/// How the spectral scheme evaluates `u·∇θ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvectionPath {
    /// Modal when possible, otherwise pseudo-spectral.
    Auto,
    /// Exact convolution with the few Fourier modes of the velocity. Only
    /// used with dealiasing and low-wavenumber velocities; otherwise falls
    /// back to the pseudo-spectral product.
    Modal,
    /// Products formed on the grid and transformed back.
    Pseudospectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub dt: f64,
    pub kappa: f64,
    pub dealias: bool,
    pub scheme: Scheme,
    pub advection: AdvectionPath,
    /// Steps between diagnostic records (the first and last step are always
    /// recorded).
    pub diagnostic_cadence: usize,
    /// Steps between stored field snapshots; `None` stores none.
    pub snapshot_cadence: Option<usize>,
    /// Exponent of the `lq` diagnostic column.
    pub q: f64,
    /// Accept `κ > 0` runs with `n < 4/√κ`.
    pub allow_underresolved: bool,
    /// Abort `κ = 0` runs once `‖θ‖_{Ḣ⁻¹}/‖θ‖_{L²} < 4/n`.
    pub resolution_guard: bool,
}

impl SolverConfig {
    /// Defaults: 2/3 dealiasing, scheme chosen from `κ`, diagnostics every
    /// ten steps, `q = 4`.
    pub fn new(n: usize, dt: f64, kappa: f64) -> Self {
        SolverConfig {
            n,
            dt,
            kappa,
            dealias: true,
            scheme: if kappa > 0.0 { Scheme::IntegratingFactorRk4 } else { Scheme::SemiLagrangian },
            advection: AdvectionPath::Auto,
            diagnostic_cadence: 10,
            snapshot_cadence: None,
            q: 4.0,
            allow_underresolved: false,
            resolution_guard: true,
        }
    }

    /// Parameter checks that do not depend on the flow.
    pub fn validate(&self) -> Result<()> {
        check_resolution(self.n)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa must be finite and nonnegative"));
        }
        if self.scheme == Scheme::SemiLagrangian && self.kappa != 0.0 {
            return Err(Error::config("the semi-Lagrangian scheme needs kappa = 0"));
        }
        if self.diagnostic_cadence == 0 || self.snapshot_cadence == Some(0) {
            return Err(Error::config("cadences must be at least one step"));
        }
        if self.q.is_nan() || self.q < 1.0 {
            return Err(Error::config("q must lie in [1, inf]"));
        }
        if self.kappa > 0.0 && !self.allow_underresolved {
            let needed = 4.0 / self.kappa.sqrt();
            if (self.n as f64) < needed {
                return Err(Error::config(format!(
                    "n = {} does not resolve the diffusive scale for kappa = {}; need n >= {:.0} or the override",
                    self.n, self.kappa, needed
                )));
            }
        }
        Ok(())
    }

    /// Checks that depend on the flow and the horizon, including the CFL
    /// bound `max|u|·dt·n ≤ 0.5`. Unstirred runs skip the diffusive-scale
    /// check since nothing thinner than the data can form.
    pub fn check_run(&self, protocol: &VelocityProtocol, horizon: f64) -> Result<usize> {
        if protocol.is_zero() {
            let mut relaxed = self.clone();
            relaxed.allow_underresolved = true;
            relaxed.validate()?;
        } else {
            self.validate()?;
        }
        let steps = steps_for(horizon, self.dt)?;
        let speed = protocol.max_speed(horizon);
        let cfl = speed * self.dt * self.n as f64;
        if cfl > 0.5 {
            return Err(Error::Cfl { cfl, suggested_dt: 0.5 / (speed * self.n as f64) });
        }
        let mut jumps: Vec<f64> = protocol.switching_period().into_iter().collect();
        if let crate::flow::AmplitudeSchedule::Piecewise { breaks, .. } = &protocol.schedule {
            jumps.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < horizon));
        }
        for p in jumps {
            let r = p / self.dt;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                return Err(Error::config(format!(
                    "dt = {} must divide the switching time {p}",
                    self.dt
                )));
            }
        }
        Ok(steps)
    }
}

fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::config("horizon must be finite and nonnegative"));
    }
    let r = horizon / dt;
    let steps = r.round();
    if (r - steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::config(format!("horizon {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// Instantaneous diagnostics of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Diagnostics {
    pub l2: f64,
    pub lq: f64,
    pub h1neg: f64,
    pub grad_l2: f64,
    pub grad_l1: f64,
    /// `∫|θ|^{q−2}|∇θ|²`.
    pub lq_integrand: f64,
    /// Fraction of `‖θ‖²` carried by modes with `|k|_∞ > n/6`.
    pub tail_fraction: f64,
}

fn check_initial(theta0: &ScalarField, config: &SolverConfig) -> Result<()> {
    if theta0.n() != config.n {
        return Err(Error::config(format!(
            "initial field has n = {} but the solver uses n = {}",
            theta0.n(),
            config.n
        )));
    }
    if !theta0.is_mean_zero() {
        return Err(Error::domain("initial field must have zero mean"));
    }
    Ok(())
}

/// Runs the configured scheme from `theta0` over `[0, horizon]`.
pub fn solve(
    theta0: &ScalarField,
    protocol: &VelocityProtocol,
    config: &SolverConfig,
    horizon: f64,
) -> Result<SimulationSeries> {
    let steps = config.check_run(protocol, horizon)?;
    check_initial(theta0, config)?;
    let mut series = SimulationSeries::new(config, protocol, horizon);
    match config.scheme {
        Scheme::IntegratingFactorRk4 => run_spectral(theta0, protocol, config, steps, &mut series)?,
        Scheme::SemiLagrangian => run_semi_lagrangian(theta0, protocol, config, steps, &mut series)?,
    }
    Ok(series)
}

fn recorded(step: usize, steps: usize, cadence: usize) -> bool {
    step % cadence == 0 || step == steps
}

fn guard(series: &mut SimulationSeries, config: &SolverConfig) -> Result<()> {
    if config.kappa > 0.0 || !config.resolution_guard {
        return Ok(());
    }
    let last = series.records.last().expect("guard runs after a record");
    let threshold = 4.0 / config.n as f64;
    let scale = if last.l2 > 0.0 { last.h1neg / last.l2 } else { f64::INFINITY };
    if scale < threshold {
        return Err(Error::Underresolved {
            t: last.t,
            scale,
            threshold,
            partial: Box::new(std::mem::take(series)),
        });
    }
    Ok(())
}

fn run_spectral(
    theta0: &ScalarField,
    protocol: &VelocityProtocol,
    config: &SolverConfig,
    steps: usize,
    series: &mut SimulationSeries,
) -> Result<()> {
    let mut engine = SpectralEngine::new(config)?;
    let mut v = engine.load(theta0);
    let mut grad_sq = 0.0;
    let mut d = engine.diagnostics(&v, config.q);
    series.push(0.0, d, 0.0);
    guard(series, config)?;
    if config.snapshot_cadence.is_some() {
        series.snapshots.push((0.0, engine.to_field(&v)?));
    }
    for step in 1..=steps {
        let t = (step - 1) as f64 * config.dt;
        grad_sq += engine.step(&mut v, protocol, t, config.dt);
        let now = step as f64 * config.dt;
        if recorded(step, steps, config.diagnostic_cadence) {
            d = engine.diagnostics(&v, config.q);
            series.push(now, d, grad_sq);
            guard(series, config)?;
        }
        if let Some(c) = config.snapshot_cadence {
            if step % c == 0 {
                series.snapshots.push((now, engine.to_field(&v)?));
            }
        }
    }
    series.final_field = Some(engine.to_field(&v)?);
    Ok(())
}

fn physical_diagnostics(field: &ScalarField, q: f64) -> Result<Diagnostics> {
    let [gx, gy] = crate::spectral::gradient(field)?;
    let grads: Vec<(f64, f64)> = gx.values().iter().zip(gy.values()).map(|(a, b)| (*a, *b)).collect();
    Ok(Diagnostics::from_parts(field.n(), field.spectral(), field.values(), &grads, q))
}

fn run_semi_lagrangian(
    theta0: &ScalarField,
    protocol: &VelocityProtocol,
    config: &SolverConfig,
    steps: usize,
    series: &mut SimulationSeries,
) -> Result<()> {
    let n = config.n;
    let mut field = project_mean_zero(theta0);
    series.push(0.0, physical_diagnostics(&field, config.q)?, 0.0);
    guard(series, config)?;
    if config.snapshot_cadence.is_some() {
        series.snapshots.push((0.0, field.clone()));
    }
    for step in 1..=steps {
        let t = (step - 1) as f64 * config.dt;
        let values = semi_lagrangian::step(field.values(), n, protocol, t, config.dt);
        field = ScalarField::from_values(n, values)?;
        let now = step as f64 * config.dt;
        if recorded(step, steps, config.diagnostic_cadence) {
            series.push(now, physical_diagnostics(&field, config.q)?, 0.0);
            guard(series, config)?;
        }
        if let Some(c) = config.snapshot_cadence {
            if step % c == 0 {
                series.snapshots.push((now, field.clone()));
            }
        }
    }
    series.final_field = Some(field);
    Ok(())
}

/// Advances the spectral scheme from `theta0` at the configured diffusivity
/// and at `other_kappa` side by side, recording `‖θ_a(t) − θ_b(t)‖_{Ḣ⁻¹}`
/// at the diagnostic cadence.
pub fn h1neg_gap(
    theta0: &ScalarField,
    protocol: &VelocityProtocol,
    config: &SolverConfig,
    other_kappa: f64,
    horizon: f64,
) -> Result<Vec<(f64, f64)>> {
    let mut other = config.clone();
    other.kappa = other_kappa;
    let steps = config.check_run(protocol, horizon)?;
    other.check_run(protocol, horizon)?;
    check_initial(theta0, config)?;
    let mut a = SpectralEngine::new(config)?;
    let mut b = SpectralEngine::new(&other)?;
    let mut va = a.load(theta0);
    let mut vb = b.load(theta0);
    let mut out = vec![(0.0, 0.0)];
    for step in 1..=steps {
        let t = (step - 1) as f64 * config.dt;
        a.step(&mut va, protocol, t, config.dt);
        b.step(&mut vb, protocol, t, config.dt);
        if recorded(step, steps, config.diagnostic_cadence) {
            out.push((step as f64 * config.dt, a.h1neg_distance(&va, &vb)));
        }
    }
    Ok(out)
}

/// One integrating-factor RK4 step of the advection-diffusion equation.
pub fn step_advection_diffusion(
    state: &ScalarField,
    protocol: &VelocityProtocol,
    t: f64,
    config: &SolverConfig,
) -> Result<ScalarField> {
    if config.kappa <= 0.0 {
        return Err(Error::config("step_advection_diffusion needs kappa > 0"));
    }
    let mut c = config.clone();
    c.scheme = Scheme::IntegratingFactorRk4;
    check_step(state, protocol, t, &c)?;
    let mut engine = SpectralEngine::new(&c)?;
    let mut v = engine.load(state);
    engine.step(&mut v, protocol, t, c.dt);
    engine.to_field(&v)
}

/// One semi-Lagrangian step of the transport equation.
pub fn step_transport(
    state: &ScalarField,
    protocol: &VelocityProtocol,
    t: f64,
    config: &SolverConfig,
) -> Result<ScalarField> {
    if config.kappa != 0.0 {
        return Err(Error::config("step_transport needs kappa = 0"));
    }
    let mut c = config.clone();
    c.scheme = Scheme::SemiLagrangian;
    check_step(state, protocol, t, &c)?;
    let values = semi_lagrangian::step(state.values(), c.n, protocol, t, c.dt);
    ScalarField::from_values(c.n, values)
}

fn check_step(state: &ScalarField, protocol: &VelocityProtocol, t: f64, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if state.n() != config.n {
        return Err(Error::config("state resolution differs from the solver's"));
    }
    let speed = protocol.at_time(t).max_speed().max(protocol.at_time(t + config.dt).max_speed());
    let cfl = speed * config.dt * config.n as f64;
    if cfl > 0.5 {
        return Err(Error::Cfl { cfl, suggested_dt: 0.5 / (speed * config.n as f64) });
    }
    Ok(())
}
