use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{InstantVelocity, Normalization, Shape, VelocityProtocol};
use crate::quad::{integrate, integrate_pieces};
use crate::{Error, Result};

/// `‖∇u‖_{L^s_t L^p_x}` over `[0, horizon]` with the samples it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub p: f64,
    pub s: f64,
    pub horizon: f64,
    pub value: f64,
    /// `(t, ‖∇u(t)‖_{L^p})` on a uniform grid of the horizon.
    pub per_time_series: Vec<(f64, f64)>,
}

const BUDGET_SAMPLES: usize = 101;

fn check_exponent(v: f64, name: &str) -> Result<()> {
    if v >= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("exponent {name} = {v} must lie in [1, ∞]")))
    }
}

/// `‖∇u‖_{L^p}` of a unit-amplitude pattern, using the pointwise Frobenius
/// norm of the gradient matrix.
pub fn shape_gradient_norm(shape: &Shape, p: f64) -> Result<f64> {
    check_exponent(p, "p")?;
    match shape {
        Shape::Zero => Ok(0.0),
        Shape::ShearX { .. } | Shape::ShearY { .. } => {
            if p.is_infinite() {
                return Ok(2.0 * PI);
            }
            // The phase only translates the profile.
            let f = |y: f64| (2.0 * PI * y).cos().abs().powf(p);
            let m = integrate_pieces(&f, &[0.0, 0.25, 0.75, 1.0], 1e-14);
            Ok(2.0 * PI * m.powf(1.0 / p))
        }
        Shape::Stream(_) => {
            let u = InstantVelocity { shape: shape.clone(), amplitude: 1.0 };
            if shape.is_zero() {
                return Ok(0.0);
            }
            if p.is_infinite() {
                return Ok(grid_max(&u));
            }
            let g = |x: f64, y: f64| u.gradient_magnitude(x, y).powf(p);
            let coarse = grid_mean(&g, 64).max(f64::MIN_POSITIVE);
            let tol = 1e-11 * coarse;
            let inner = |y: f64| integrate(&|x: f64| g(x, y), 0.0, 1.0, tol);
            let m = integrate(&inner, 0.0, 1.0, tol);
            Ok(m.powf(1.0 / p))
        }
    }
}

fn grid_mean(g: &impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += g(i as f64 * h, j as f64 * h);
        }
    }
    acc / (n * n) as f64
}

/// Maximum of `|∇u|` by a grid scan followed by local pattern search.
fn grid_max(u: &InstantVelocity) -> f64 {
    let n = 64;
    let h = 1.0 / n as f64;
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            samples.push((u.gradient_magnitude(x, y), x, y));
        }
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0_f64;
    for &(mut v, mut x, mut y) in samples.iter().take(8) {
        let mut step = h;
        while step > 1e-13 {
            let mut moved = false;
            for (dx, dy) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let w = u.gradient_magnitude(x + dx, y + dy);
                if w > v {
                    v = w;
                    x += dx;
                    y += dy;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    best
}

/// `t ↦ ‖∇u(t)‖_{L^p} = |A(t)|·K_p` for one protocol.
#[derive(Clone, Debug)]
pub struct GradientNorm {
    pub p: f64,
    /// `K_p`, the norm per unit amplitude.
    pub constant: f64,
    protocol: VelocityProtocol,
}

impl GradientNorm {
    pub fn at(&self, t: f64) -> f64 {
        self.protocol.amplitude(t).abs() * self.constant
    }

    fn pieces(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut pts = vec![t0];
        pts.extend(self.protocol.switch_times(t0, t1));
        pts.push(t1);
        pts
    }

    /// `∫_{t0}^{t1} ‖∇u‖_{L^p} dt`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 || self.constant == 0.0 {
            return 0.0;
        }
        let scale = self.protocol.schedule.sup(t0, t1) * self.constant * (t1 - t0);
        integrate_pieces(&|t| self.at(t), &self.pieces(t0, t1), 1e-13 * scale.max(1e-300))
    }

    /// `‖∇u‖_{L^s_t L^p_x}` over `[0, horizon]`.
    pub fn budget(&self, s: f64, horizon: f64) -> Result<f64> {
        check_exponent(s, "s")?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("budget horizon must be positive and finite"));
        }
        let sup = self.protocol.schedule.sup(0.0, horizon) * self.constant;
        if s.is_infinite() || sup == 0.0 {
            return Ok(sup);
        }
        // Normalise by the supremum so the integrand stays O(1).
        let f = |t: f64| (self.at(t) / sup).powf(s);
        let v = integrate_pieces(&f, &self.pieces(0.0, horizon), 1e-14 * horizon);
        Ok(sup * v.powf(1.0 / s))
    }
}

impl VelocityProtocol {
    pub fn gradient_norm(&self, p: f64) -> Result<GradientNorm> {
        let constant = shape_gradient_norm(&self.shape_at(0.0), p)?;
        Ok(GradientNorm { p, constant, protocol: self.clone() })
    }

    pub fn budget(&self, p: f64, s: f64, horizon: f64) -> Result<BudgetReport> {
        let g = self.gradient_norm(p)?;
        let value = g.budget(s, horizon)?;
        let per_time_series = (0..BUDGET_SAMPLES)
            .map(|i| {
                let t = horizon * i as f64 / (BUDGET_SAMPLES - 1) as f64;
                (t, g.at(t))
            })
            .collect();
        Ok(BudgetReport { p, s, horizon, value, per_time_series })
    }
}

/// Rescales the amplitude schedule so that the budget over `[0, horizon]`
/// equals one.
pub fn normalize_to_budget(
    protocol: &VelocityProtocol,
    p: f64,
    s: f64,
    horizon: f64,
) -> Result<(VelocityProtocol, BudgetReport)> {
    let before = protocol.budget(p, s, horizon)?;
    if !(before.value > 0.0 && before.value.is_finite()) {
        return Err(Error::domain("cannot normalise a zero flow"));
    }
    let factor = 1.0 / before.value;
    let mut scaled = protocol.scaled(factor);
    let total = protocol.normalization.map_or(1.0, |n| n.factor) * factor;
    scaled.normalization = Some(Normalization { p, s, horizon, factor: total });
    let report = scaled.budget(p, s, horizon)?;
    Ok((scaled, report))
}
