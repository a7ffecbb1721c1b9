//! Divergence-free stirring protocols on the unit torus.
//!
//! Every protocol is an amplitude schedule `A(t)` times a spatial pattern
//! that may switch at fixed times. Because the pattern for a given protocol
//! always has the same `‖∇u‖_{L^p}` per unit amplitude, the velocity-gradient
//! budget reduces to a time integral of `A(t)`.

mod budget;
mod config;
mod trajectory;
mod velocity;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use budget::{normalize_to_budget, shape_gradient_norm, BudgetReport, GradientNorm};
pub use trajectory::{flow_map, Trajectory};
pub use velocity::{InstantVelocity, Shape, StreamMode};

use crate::{Error, Result};

/// How the alternating shears pick their phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PhaseSchedule {
    /// Independent uniform phases on `[0, 2π)`, keyed by (seed, cycle index).
    Seeded { seed: u64 },
    /// `(φ_j, ψ_j)` taken cyclically from the list.
    Fixed { phases: Vec<[f64; 2]> },
}

impl PhaseSchedule {
    pub fn phases(&self, cycle: u64) -> (f64, f64) {
        match self {
            PhaseSchedule::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(cycle);
                let phi = rng.gen_range(0.0..2.0 * PI);
                let psi = rng.gen_range(0.0..2.0 * PI);
                (phi, psi)
            }
            PhaseSchedule::Fixed { phases } => {
                let [a, b] = phases[(cycle % phases.len() as u64) as usize];
                (a, b)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FlowKind {
    /// `u = (A sin 2πy, 0)`.
    SteadyShear,
    /// x- and y-shears alternating every `switching_period`.
    AlternatingSine { switching_period: f64, phases: PhaseSchedule },
    /// Stream function `ψ = A/(2π)·sin 2πx·sin 2πy`.
    Cellular,
    /// Stream function `ψ = A·Σ a_m cos(2π k_m·x + φ_m)`.
    CustomStreamfunction { modes: Vec<StreamMode> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "schedule")]
pub enum AmplitudeSchedule {
    Constant { amplitude: f64 },
    /// `amplitudes[i]` on `[breaks[i], breaks[i+1])`; the last value holds
    /// forever and `breaks[0]` must be 0.
    Piecewise { breaks: Vec<f64>, amplitudes: Vec<f64> },
    /// `A₀(1 + t)^{−decay}`.
    PowerLaw { amplitude: f64, decay: f64 },
}

impl AmplitudeSchedule {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            AmplitudeSchedule::Constant { amplitude } => *amplitude,
            AmplitudeSchedule::Piecewise { breaks, amplitudes } => {
                let i = breaks.partition_point(|&b| b <= t).max(1) - 1;
                amplitudes[i]
            }
            AmplitudeSchedule::PowerLaw { amplitude, decay } => amplitude * (1.0 + t).powf(-decay),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            AmplitudeSchedule::Constant { amplitude } => {
                AmplitudeSchedule::Constant { amplitude: amplitude * c }
            }
            AmplitudeSchedule::Piecewise { breaks, amplitudes } => AmplitudeSchedule::Piecewise {
                breaks: breaks.clone(),
                amplitudes: amplitudes.iter().map(|a| a * c).collect(),
            },
            AmplitudeSchedule::PowerLaw { amplitude, decay } => {
                AmplitudeSchedule::PowerLaw { amplitude: amplitude * c, decay: *decay }
            }
        }
    }

    /// Times strictly inside `(t0, t1)` where the schedule jumps.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            AmplitudeSchedule::Piecewise { breaks, .. } => {
                breaks.iter().copied().filter(|&b| b > t0 && b < t1).collect()
            }
            _ => Vec::new(),
        }
    }

    /// `sup |A|` over `[t0, t1]`.
    pub fn sup(&self, t0: f64, t1: f64) -> f64 {
        match self {
            AmplitudeSchedule::Constant { amplitude } => amplitude.abs(),
            AmplitudeSchedule::Piecewise { breaks, amplitudes } => {
                let mut m = self.at(t0).abs();
                for (b, a) in breaks.iter().zip(amplitudes) {
                    if *b > t0 && *b <= t1 {
                        m = m.max(a.abs());
                    }
                }
                m
            }
            AmplitudeSchedule::PowerLaw { .. } => self.at(t0).abs().max(self.at(t1).abs()),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be finite")))
            }
        };
        match self {
            AmplitudeSchedule::Constant { amplitude } => finite(*amplitude, "amplitude"),
            AmplitudeSchedule::Piecewise { breaks, amplitudes } => {
                if breaks.is_empty() || breaks.len() != amplitudes.len() || breaks[0] != 0.0 {
                    return Err(Error::config(
                        "piecewise schedule needs matching breaks/amplitudes starting at 0",
                    ));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("piecewise breaks must be increasing"));
                }
                amplitudes.iter().try_for_each(|a| finite(*a, "amplitude"))
            }
            AmplitudeSchedule::PowerLaw { amplitude, decay } => {
                finite(*amplitude, "amplitude")?;
                finite(*decay, "decay")?;
                if *decay < 0.0 {
                    return Err(Error::config("power-law decay must be nonnegative"));
                }
                Ok(())
            }
        }
    }
}

/// Record of a budget normalization applied to a protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub p: f64,
    pub s: f64,
    pub horizon: f64,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityProtocol {
    pub kind: FlowKind,
    pub schedule: AmplitudeSchedule,
    pub normalization: Option<Normalization>,
}

/// Alternating x/y sine shears with seeded phases.
pub fn make_alternating_sine_flow(seed: u64, switching_period: f64, amplitude: f64) -> Result<VelocityProtocol> {
    if !(switching_period > 0.0 && switching_period.is_finite()) {
        return Err(Error::config("switching period must be positive"));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::config("amplitude must be positive"));
    }
    VelocityProtocol::new(
        FlowKind::AlternatingSine { switching_period, phases: PhaseSchedule::Seeded { seed } },
        AmplitudeSchedule::Constant { amplitude },
    )
}

impl VelocityProtocol {
    pub fn new(kind: FlowKind, schedule: AmplitudeSchedule) -> Result<Self> {
        schedule.validate()?;
        match &kind {
            FlowKind::AlternatingSine { switching_period, phases } => {
                if !(*switching_period > 0.0 && switching_period.is_finite()) {
                    return Err(Error::config("switching period must be positive"));
                }
                if let PhaseSchedule::Fixed { phases } = phases {
                    if phases.is_empty() {
                        return Err(Error::config("fixed phase list is empty"));
                    }
                }
            }
            FlowKind::CustomStreamfunction { modes } => {
                if modes.iter().any(|m| !m.amplitude.is_finite() || !m.phase.is_finite()) {
                    return Err(Error::config("stream modes must be finite"));
                }
            }
            _ => {}
        }
        Ok(VelocityProtocol { kind, schedule, normalization: None })
    }

    pub fn zero() -> Self {
        VelocityProtocol {
            kind: FlowKind::SteadyShear,
            schedule: AmplitudeSchedule::Constant { amplitude: 0.0 },
            normalization: None,
        }
    }

    pub fn steady_shear(amplitude: f64) -> Result<Self> {
        Self::new(FlowKind::SteadyShear, AmplitudeSchedule::Constant { amplitude })
    }

    pub fn cellular(amplitude: f64) -> Result<Self> {
        Self::new(FlowKind::Cellular, AmplitudeSchedule::Constant { amplitude })
    }

    pub fn with_schedule(mut self, schedule: AmplitudeSchedule) -> Result<Self> {
        schedule.validate()?;
        self.schedule = schedule;
        self.normalization = None;
        Ok(self)
    }

    /// Multiplies the amplitude schedule by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        VelocityProtocol {
            kind: self.kind.clone(),
            schedule: self.schedule.scaled(c),
            normalization: self.normalization,
        }
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        self.schedule.at(t)
    }

    /// Index of the shear leg containing `t`; boundaries belong to the leg
    /// that starts there.
    fn leg(&self, t: f64, period: f64) -> u64 {
        let r = t / period;
        let k = r.round();
        let leg = if (r - k).abs() < 1e-9 { k } else { r.floor() };
        leg.max(0.0) as u64
    }

    /// The spatial pattern active at time `t`.
    pub fn shape_at(&self, t: f64) -> Shape {
        match &self.kind {
            FlowKind::SteadyShear => Shape::ShearX { phase: 0.0 },
            FlowKind::AlternatingSine { switching_period, phases } => {
                let leg = self.leg(t, *switching_period);
                let (phi, psi) = phases.phases(leg / 2);
                if leg % 2 == 0 {
                    Shape::ShearX { phase: phi }
                } else {
                    Shape::ShearY { phase: psi }
                }
            }
            FlowKind::Cellular => Shape::Stream(Arc::from(cellular_modes())),
            FlowKind::CustomStreamfunction { modes } => Shape::Stream(Arc::from(modes.as_slice())),
        }
    }

    pub fn at_time(&self, t: f64) -> InstantVelocity {
        InstantVelocity { shape: self.shape_at(t), amplitude: self.amplitude(t) }
    }

    pub fn velocity_at(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        self.at_time(t).velocity(x[0], x[1])
    }

    pub fn grad_velocity_at(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.at_time(t).gradient(x[0], x[1])
    }

    /// Times strictly inside `(t0, t1)` where the velocity may jump.
    pub fn switch_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = self.schedule.breakpoints(t0, t1);
        if let FlowKind::AlternatingSine { switching_period, .. } = self.kind {
            let mut k = (t0 / switching_period).floor() + 1.0;
            while k * switching_period < t1 {
                let b = k * switching_period;
                if b > t0 {
                    out.push(b);
                }
                k += 1.0;
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `sup_{t ≤ horizon} max_x |u(t, x)|`.
    pub fn max_speed(&self, horizon: f64) -> f64 {
        self.schedule.sup(0.0, horizon) * self.shape_at(0.0).max_speed()
    }

    pub fn switching_period(&self) -> Option<f64> {
        match self.kind {
            FlowKind::AlternatingSine { switching_period, .. } => Some(switching_period),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.schedule, AmplitudeSchedule::Constant { amplitude } if amplitude == 0.0)
            || self.shape_at(0.0).is_zero()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FlowKind::SteadyShear => "steady-shear",
            FlowKind::AlternatingSine { .. } => "alternating-sine",
            FlowKind::Cellular => "cellular",
            FlowKind::CustomStreamfunction { .. } => "custom-streamfunction",
        }
    }
}

fn cellular_modes() -> Vec<StreamMode> {
    // sin 2πx sin 2πy / (2π) = (cos 2π(x−y) − cos 2π(x+y)) / (4π)
    let a = 1.0 / (4.0 * PI);
    vec![
        StreamMode { kx: 1, ky: -1, amplitude: a, phase: 0.0 },
        StreamMode { kx: 1, ky: 1, amplitude: -a, phase: 0.0 },
    ]
}
