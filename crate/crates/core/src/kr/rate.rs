//! Finite-difference check of `|d/dt D_δ(θ(t))| ≲ ‖∇u‖_{L^p}‖θ‖_{L^{p'}} + (κ/δ)‖∇θ‖_{L¹}`.

use serde::{Deserialize, Serialize};

use super::{
    coarse_grain, discretize, kr_distance_entropic, kr_distance_exact, EntropicOptions, KrMethod, KrResult,
    DEFAULT_MASS_FLOOR,
};
use crate::flow::VelocityProtocol;
use crate::solver::SimulationSeries;
use crate::spectral::{gradient_l1_norm, lebesgue_norm, ScalarField};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateCheckOptions {
    pub method: KrMethod,
    /// Coarse grid for the transport problem; `None` keeps the snapshot grid.
    pub coarse: Option<usize>,
    pub entropic: EntropicOptions,
    /// A sample is inconclusive when the summed gaps exceed this fraction of
    /// the finite difference.
    pub gap_fraction: f64,
}

impl Default for RateCheckOptions {
    fn default() -> Self {
        RateCheckOptions {
            method: KrMethod::ExactFlow,
            coarse: Some(32),
            entropic: EntropicOptions::default(),
            gap_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub t: f64,
    pub distance: f64,
    pub derivative: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub inconclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub delta: f64,
    pub p: f64,
    pub samples: Vec<RateSample>,
}

impl RateCheck {
    /// Supremum of the conclusive ratios.
    pub fn sup_ratio(&self) -> f64 {
        self.samples.iter().filter(|s| !s.inconclusive).map(|s| s.ratio).fold(0.0, f64::max)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.samples.iter().any(|s| s.inconclusive)
    }
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn distance(field: &ScalarField, delta: f64, options: &RateCheckOptions) -> Result<KrResult> {
    let f = match options.coarse {
        Some(m) if m < field.n() => coarse_grain(field, m)?,
        _ => field.clone(),
    };
    let pair = discretize(&crate::spectral::project_mean_zero(&f), DEFAULT_MASS_FLOOR)?;
    match options.method {
        KrMethod::ExactFlow => kr_distance_exact(&pair, delta),
        KrMethod::Entropic => kr_distance_entropic(&pair, delta, options.entropic),
    }
}

/// Central differences of `D_δ` over the series snapshots, divided by the
/// right-hand side evaluated at the centre snapshot.
pub fn kr_rate_check(
    series: &SimulationSeries,
    protocol: &VelocityProtocol,
    kappa: f64,
    delta: f64,
    p: f64,
    options: RateCheckOptions,
) -> Result<RateCheck> {
    if !(delta > 0.0) {
        return Err(Error::domain("delta must be positive"));
    }
    if !(p >= 1.0) {
        return Err(Error::domain("p must be at least 1"));
    }
    let snaps = &series.snapshots;
    if snaps.len() < 3 {
        return Err(Error::domain("rate check needs at least three snapshots"));
    }
    let step = snaps[1].0 - snaps[0].0;
    if !(step > 0.0) || snaps.windows(2).any(|w| ((w[1].0 - w[0].0) - step).abs() > 1e-9 * step.max(1.0)) {
        return Err(Error::domain("snapshots must be at a uniform cadence"));
    }
    let grad_u = protocol.gradient_norm(p)?;
    let pc = conjugate(p);
    let results = snaps
        .iter()
        .map(|(_, f)| distance(f, delta, &options))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(snaps.len() - 2);
    for k in 1..snaps.len() - 1 {
        let (t, field) = (&snaps[k].0, &snaps[k].1);
        let diff = results[k + 1].value - results[k - 1].value;
        let derivative = diff / (2.0 * step);
        let advective = if protocol.is_zero() { 0.0 } else { grad_u.at(*t) * lebesgue_norm(field, pc)? };
        let diffusive = if kappa > 0.0 { kappa / delta * gradient_l1_norm(field)? } else { 0.0 };
        let rhs = advective + diffusive;
        let ratio = if diff.abs() <= 1e-14 * results[k].value.abs().max(1e-300) || diff == 0.0 {
            0.0
        } else if rhs > 0.0 {
            derivative.abs() / rhs
        } else {
            f64::INFINITY
        };
        let gaps = results[k + 1].gap + results[k - 1].gap;
        let inconclusive = gaps > options.gap_fraction * diff.abs() && gaps > 0.0
            || !results[k + 1].converged
            || !results[k - 1].converged;
        samples.push(RateSample { t: *t, distance: results[k].value, derivative, rhs, ratio, inconclusive });
    }
    Ok(RateCheck { delta, p, samples })
}
