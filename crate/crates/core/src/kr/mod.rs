//! Kantorovich–Rubinstein distance with logarithmic cost between the positive
//! and negative parts of a mean-zero field:
//!
//! `D_δ(θ) = inf_{π ∈ Π(θ⁺, θ⁻)} ∫ log(d(x, y)/δ + 1) dπ(x, y)`,
//!
//! with `d` the geodesic distance on the unit torus.

mod entropic;
mod exact;
mod rate;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use entropic::{kr_distance_entropic, EntropicOptions};
pub use exact::{kr_distance_exact, kr_distance_exact_with_cap, DEFAULT_SUPPORT_CAP};
pub use rate::{kr_rate_check, RateCheck, RateCheckOptions, RateSample};

use crate::spectral::{gradient_l1_norm, lebesgue_norm, ScalarField};
use crate::{Error, Result};

pub const DEFAULT_MASS_FLOOR: f64 = 1e-14;

/// Geodesic diameter of the unit torus.
pub const TORUS_DIAMETER: f64 = std::f64::consts::SQRT_2 / 2.0;

/// Geodesic distance on `[0,1)²` with periodic identification.
pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let wrap = |d: f64| {
        let d = (d - d.round()).abs();
        d.min(1.0 - d)
    };
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

/// `c(r) = log(r/δ + 1)`.
pub fn log_cost(r: f64, delta: f64) -> f64 {
    (r / delta).ln_1p()
}

/// Point masses of `θ⁺` and `θ⁻`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasurePair {
    pub plus: Vec<([f64; 2], f64)>,
    pub minus: Vec<([f64; 2], f64)>,
    pub total_mass: f64,
}

impl DiscreteMeasurePair {
    /// Builds a pair from explicit point masses; the two totals must agree to
    /// `1e-10` relative and are then balanced exactly.
    pub fn new(plus: Vec<([f64; 2], f64)>, minus: Vec<([f64; 2], f64)>) -> Result<Self> {
        if plus.iter().chain(&minus).any(|(_, m)| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::domain("point masses must be finite and nonnegative"));
        }
        let mp: f64 = plus.iter().map(|p| p.1).sum();
        let mm: f64 = minus.iter().map(|p| p.1).sum();
        if (mp - mm).abs() > 1e-10 * mp.max(mm).max(1e-300) && (mp - mm).abs() > 1e-300 {
            return Err(Error::domain(format!("unbalanced masses {mp} and {mm}")));
        }
        Ok(Self::balanced(plus, minus, mp, mm))
    }

    fn balanced(mut plus: Vec<([f64; 2], f64)>, mut minus: Vec<([f64; 2], f64)>, mp: f64, mm: f64) -> Self {
        let total = 0.5 * (mp + mm);
        if mp > 0.0 {
            plus.iter_mut().for_each(|p| p.1 *= total / mp);
        }
        if mm > 0.0 {
            minus.iter_mut().for_each(|p| p.1 *= total / mm);
        }
        DiscreteMeasurePair { plus, minus, total_mass: total }
    }

    pub fn swapped(&self) -> Self {
        DiscreteMeasurePair { plus: self.minus.clone(), minus: self.plus.clone(), total_mass: self.total_mass }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &[([f64; 2], f64)]| v.iter().map(|&(x, m)| (x, m * c)).collect();
        DiscreteMeasurePair { plus: s(&self.plus), minus: s(&self.minus), total_mass: self.total_mass * c }
    }

    pub fn support_size(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_mass == 0.0
    }

    pub(crate) fn cost_matrix(&self, delta: f64) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.plus.len() * self.minus.len());
        for (x, _) in &self.plus {
            for (y, _) in &self.minus {
                c.push(log_cost(torus_distance(*x, *y), delta));
            }
        }
        c
    }
}

/// Splits a mean-zero field into cell masses `value·h²` at the grid points.
/// Cells with mass below `mass_floor` are dropped; the totals are then
/// balanced by a proportional correction.
pub fn discretize(field: &ScalarField, mass_floor: f64) -> Result<DiscreteMeasurePair> {
    if !field.is_mean_zero() {
        return Err(Error::domain("discretize needs a mean-zero field"));
    }
    let n = field.n();
    let h = 1.0 / n as f64;
    let area = h * h;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let m = field.values()[j * n + i] * area;
            let x = [i as f64 * h, j as f64 * h];
            if m >= mass_floor && m > 0.0 {
                plus.push((x, m));
            } else if -m >= mass_floor && m < 0.0 {
                minus.push((x, -m));
            }
        }
    }
    let mp: f64 = plus.iter().map(|p| p.1).sum();
    let mm: f64 = minus.iter().map(|p| p.1).sum();
    Ok(DiscreteMeasurePair::balanced(plus, minus, mp, mm))
}

/// Block average of a field onto the `m×m` grid; `m` must divide `n`.
pub fn coarse_grain(field: &ScalarField, m: usize) -> Result<ScalarField> {
    let n = field.n();
    if m == 0 || m > n || n % m != 0 || !m.is_power_of_two() {
        return Err(Error::config(format!("cannot coarse-grain n = {n} onto m = {m}")));
    }
    let b = n / m;
    let mut values = vec![0.0; m * m];
    for j in 0..n {
        for i in 0..n {
            values[(j / b) * m + i / b] += field.values()[j * n + i];
        }
    }
    let scale = 1.0 / (b * b) as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    ScalarField::from_values(m, values)
}

/// Certified bound on `|D_δ(θ) − D_δ(coarse_grain(θ, m))|`: every block's
/// signed masses are moved to its representative point at cost at most
/// `c(√2/m)` per unit of the positive part of the difference.
pub fn coarsening_error(field: &ScalarField, m: usize, delta: f64) -> Result<f64> {
    let n = field.n();
    coarse_grain(field, m)?;
    let b = n / m;
    let area = 1.0 / (n * n) as f64;
    let mut abs = vec![0.0; m * m];
    let mut net = vec![0.0; m * m];
    for j in 0..n {
        for i in 0..n {
            let v = field.values()[j * n + i] * area;
            abs[(j / b) * m + i / b] += v.abs();
            net[(j / b) * m + i / b] += v;
        }
    }
    let moved: f64 = abs.iter().zip(&net).map(|(a, s)| 0.5 * (a + s.abs())).sum();
    Ok(log_cost(std::f64::consts::SQRT_2 / m as f64, delta) * moved)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KrMethod {
    ExactFlow,
    Entropic,
}

/// One entry of a transport plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub src: [f64; 2],
    pub dst: [f64; 2],
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrResult {
    pub value: f64,
    pub delta: f64,
    pub method: KrMethod,
    /// Certified bound on `value − D_δ` (zero for the exact solver).
    pub gap: f64,
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coarsening_error: Option<f64>,
    #[serde(skip)]
    pub converged: bool,
    #[serde(skip)]
    pub plan: Option<Vec<PlanEntry>>,
}

impl KrResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }

    pub fn write_plan_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x_src,y_src,x_dst,y_dst,mass")?;
        for p in self.plan.iter().flatten() {
            writeln!(w, "{},{},{},{},{}", p.src[0], p.src[1], p.dst[0], p.dst[1], p.mass)?;
        }
        Ok(())
    }
}

/// `log(diam/δ + 1)·mass`: every unit of mass travels at most the diameter.
pub fn kr_upper_bound(pair: &DiscreteMeasurePair, delta: f64) -> f64 {
    log_cost(TORUS_DIAMETER, delta) * pair.total_mass
}

/// `log(‖θ‖₁/(δC‖∇θ‖₁) + 1)·‖θ‖₁` from precomputed norms.
pub fn kr_lower_bound_from_norms(l1: f64, grad_l1: f64, delta: f64, constant: f64) -> Result<f64> {
    if !(grad_l1 > 0.0) {
        return Err(Error::domain("lower bound needs a nonzero gradient"));
    }
    if !(delta > 0.0 && constant > 0.0) {
        return Err(Error::domain("delta and C must be positive"));
    }
    Ok((l1 / (delta * constant * grad_l1)).ln_1p() * l1)
}

/// Lower bound on `D_δ(θ)` with the caller's constant `C`.
pub fn kr_lower_bound(field: &ScalarField, delta: f64, constant: f64) -> Result<f64> {
    kr_lower_bound_from_norms(lebesgue_norm(field, 1.0)?, gradient_l1_norm(field)?, delta, constant)
}

/// Smallest `C` for which the lower bound stays below the exact value on one
/// instance: `C = ‖θ‖₁ / (δ‖∇θ‖₁(e^{D/‖θ‖₁} − 1))`.
pub fn lower_bound_constant(l1: f64, grad_l1: f64, delta: f64, exact: f64) -> f64 {
    l1 / (delta * grad_l1 * (exact / l1).exp_m1())
}

/// Largest per-instance constant over a corpus of `(‖θ‖₁, ‖∇θ‖₁, D_δ)`.
pub fn calibrate_lower_constant(corpus: &[(f64, f64, f64)], delta: f64) -> f64 {
    corpus
        .iter()
        .map(|&(l1, g, d)| lower_bound_constant(l1, g, delta, d))
        .fold(0.0, f64::max)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must be positive, got {delta}")))
    }
}

#[cfg(test)]
mod tests;
