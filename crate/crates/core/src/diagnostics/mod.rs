//! Rates, length scales and crossover times extracted from simulation
//! series, and the inequalities they are checked against.

use serde::{Deserialize, Serialize};

use crate::flow::{GradientNorm, VelocityProtocol};
use crate::solver::{h1neg_gap, SimulationSeries, SolverConfig};
use crate::spectral::ScalarField;
use crate::{Error, Result};

/// Minimum number of samples in a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fraction of the initial variance dissipated at the enhancement time.
pub const DELTA_STAR: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitWindow {
    Full,
    Explicit { start: f64, end: f64 },
    /// Latest window spanning at least `efoldings` of decay whose fit reaches
    /// `min_r_squared`.
    Late { efoldings: f64, min_r_squared: f64 },
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow::Late { efoldings: 2.0, min_r_squared: 0.95 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub prefactor: f64,
    pub window: [f64; 2],
    pub r_squared: f64,
    #[serde(skip)]
    pub norm_name: String,
    #[serde(skip)]
    pub samples: usize,
}

impl RateFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }
}

/// Least-squares line `y = a + b·x`; returns `(a, b, r², stderr(b))`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let stderr = if x.len() > 2 { (ss_res / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
    (intercept, slope, r2, stderr)
}

fn fit_range(t: &[f64], v: &[f64], lo: usize, hi: usize, name: &str) -> RateFit {
    let logs: Vec<f64> = v[lo..=hi].iter().map(|x| x.ln()).collect();
    let (a, b, r2, _) = linear_fit(&t[lo..=hi], &logs);
    RateFit {
        rate: -b,
        prefactor: a.exp(),
        window: [t[lo], t[hi]],
        r_squared: r2,
        norm_name: name.to_string(),
        samples: hi - lo + 1,
    }
}

/// Fits `v(t) ≈ P e^{−Dt}` by least squares on `log v`.
pub fn fit_exponential(times: &[f64], values: &[f64], window: FitWindow, norm_name: &str) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::domain("times and values differ in length"));
    }
    let vmax = values.iter().cloned().fold(0.0, f64::max);
    let floor = 10.0 * f64::EPSILON * vmax;
    match window {
        FitWindow::Full | FitWindow::Explicit { .. } => {
            let (a, b) = match window {
                FitWindow::Explicit { start, end } => (start, end),
                _ => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= a && times[k] <= b).collect();
            if idx.len() < MIN_FIT_SAMPLES || !(times[idx[idx.len() - 1]] > times[idx[0]]) {
                return Err(Error::domain(format!(
                    "fit window holds {} samples, need at least {MIN_FIT_SAMPLES}",
                    idx.len()
                )));
            }
            let (lo, hi) = (idx[0], idx[idx.len() - 1]);
            if values[lo..=hi].iter().any(|&x| !(x > floor) || !x.is_finite()) {
                return Err(Error::domain("fit window contains values at or below the roundoff floor"));
            }
            Ok(fit_range(times, values, lo, hi, norm_name))
        }
        FitWindow::Late { efoldings, min_r_squared } => {
            // values at the roundoff floor end the usable record
            let usable = values.iter().position(|&x| !(x > 1e3 * f64::EPSILON * vmax)).unwrap_or(values.len());
            for hi in (MIN_FIT_SAMPLES - 1..usable).rev() {
                let target = values[hi].ln() + efoldings;
                let Some(lo) = (0..=hi + 1 - MIN_FIT_SAMPLES).rev().find(|&k| values[k].ln() >= target) else {
                    continue;
                };
                let fit = fit_range(times, values, lo, hi, norm_name);
                if fit.r_squared >= min_r_squared {
                    return Ok(fit);
                }
            }
            Err(Error::domain(format!(
                "no window spans {efoldings} e-foldings with r^2 >= {min_r_squared}"
            )))
        }
    }
}

/// Exponential rate of a named diagnostic column.
pub fn fit_exponential_rate(series: &SimulationSeries, norm_name: &str, window: FitWindow) -> Result<RateFit> {
    let v = series.column(norm_name)?;
    fit_exponential(&series.times(), &v, window, norm_name)
}

/// `ℓ(t) = ‖θ‖_{Ḣ⁻¹}/‖θ‖_{L²}`.
pub fn batchelor_scale(series: &SimulationSeries) -> Result<Vec<(f64, f64)>> {
    series
        .records
        .iter()
        .map(|r| {
            if r.l2 > 0.0 {
                Ok((r.t, r.h1neg / r.l2))
            } else {
                Err(Error::domain(format!("L2 norm vanished at t = {}", r.t)))
            }
        })
        .collect()
}

/// Median of `ℓ(t)` over the second half of the run against the predicted
/// filament width `√(κ T_{κ,s})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchelorPlateau {
    pub plateau: f64,
    pub predicted: f64,
    pub ratio: f64,
}

pub fn batchelor_plateau(series: &SimulationSeries, kappa: f64, s: f64) -> Result<BatchelorPlateau> {
    let scale = batchelor_scale(series)?;
    if scale.is_empty() {
        return Err(Error::domain("empty series"));
    }
    let half = series.horizon * 0.5;
    let mut late: Vec<f64> = scale.iter().filter(|(t, _)| *t >= half).map(|p| p.1).collect();
    late.sort_by(f64::total_cmp);
    let plateau = late[late.len() / 2];
    let predicted = (kappa * theoretical_t(kappa, s)).sqrt();
    Ok(BatchelorPlateau { plateau, predicted, ratio: plateau / predicted })
}

/// First time the `L²` norm falls to half its initial value, interpolated
/// log-linearly between records; infinite if it never does.
pub fn crossover_time(series: &SimulationSeries) -> f64 {
    let r = &series.records;
    let Some(first) = r.first() else { return f64::INFINITY };
    let half = 0.5 * first.l2;
    for k in 1..r.len() {
        if r[k].l2 <= half {
            let (a, b) = (&r[k - 1], &r[k]);
            let w = (a.l2 / half).ln() / (a.l2 / b.l2).ln();
            return a.t + w * (b.t - a.t);
        }
    }
    f64::INFINITY
}

/// `T_{κ,s} = log^{s/(s−1)}(1/κ)` for `s > 1`, `1/κ` for `s = 1`.
pub fn theoretical_t(kappa: f64, s: f64) -> f64 {
    if !(kappa > 0.0 && kappa < 1.0) || !(s >= 1.0) {
        return f64::NAN;
    }
    if s == 1.0 {
        1.0 / kappa
    } else {
        (1.0 / kappa).ln().powf(log_exponent(s))
    }
}

/// `s/(s−1)`, with the limit 1 at `s = ∞`.
pub fn log_exponent(s: f64) -> f64 {
    if s.is_infinite() {
        1.0
    } else {
        s / (s - 1.0)
    }
}

/// Dissipated fraction of the initial variance computed from the quadrature
/// of `κ‖∇θ‖²` and from the energy identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationFraction {
    pub times: Vec<f64>,
    pub direct: Vec<f64>,
    pub identity: Vec<f64>,
}

impl DissipationFraction {
    pub fn max_discrepancy(&self) -> f64 {
        self.direct.iter().zip(&self.identity).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Linear interpolation of the direct fraction at `t`.
    pub fn at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.direct, t)
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.iter().position(|&s| s >= t) {
        Some(0) => values[0],
        Some(k) => {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            values[k - 1] + w * (values[k] - values[k - 1])
        }
        None => *values.last().unwrap_or(&f64::NAN),
    }
}

pub fn dissipation_fraction(series: &SimulationSeries) -> Result<DissipationFraction> {
    let Some(first) = series.records.first() else {
        return Err(Error::domain("empty series"));
    };
    let e0 = first.l2 * first.l2;
    if !(e0 > 0.0) {
        return Err(Error::domain("initial L2 norm vanishes"));
    }
    Ok(DissipationFraction {
        times: series.times(),
        direct: series.records.iter().map(|r| r.diss_cum / e0).collect(),
        identity: series.records.iter().map(|r| 0.5 * (1.0 - r.l2 * r.l2 / e0)).collect(),
    })
}

/// Envelope `‖θ(t)‖ ≤ Λe^{−Dt}‖θ₀‖` and the dissipation-time checks built
/// on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnhancementReport {
    pub lambda: f64,
    pub rate: f64,
    pub delta_star: f64,
    /// First time with dissipated fraction `≥ δ*`.
    pub t0: Option<f64>,
    /// Longest time, over every start time `s` in the run, for `‖θ‖²` to
    /// drop from `‖θ(s)‖²` to `(1 − 2δ*)‖θ(s)‖²`. Restarting the dissipation
    /// estimate at each multiple needs this uniform time, not `t₀`.
    pub restart_time: Option<f64>,
    pub forward_holds: bool,
    /// Number of multiples `m·t_r` inside the run that were checked.
    pub halving_checked: usize,
    /// `‖θ(m t_r)‖² ≤ (1 − 2δ*)^m ‖θ₀‖²` at every checked multiple.
    pub halving_holds: bool,
}

/// Relative slack allowed in the iterated-halving check.
pub const HALVING_SLACK: f64 = 1e-4;

pub fn enhancement_report(series: &SimulationSeries, kappa: f64) -> Result<EnhancementReport> {
    if !(kappa >= 0.0) {
        return Err(Error::domain("kappa must be nonnegative"));
    }
    let frac = dissipation_fraction(series)?;
    let times = series.times();
    let l2 = series.l2();
    let l0 = l2[0];
    let rate = match fit_exponential(&times, &l2, FitWindow::default(), "l2") {
        Ok(fit) => fit.rate.max(0.0),
        Err(_) => 0.0,
    };
    let lambda = times.iter().zip(&l2).map(|(t, v)| v / l0 * (rate * t).exp()).fold(0.0, f64::max);

    let t0 = frac.direct.iter().position(|&f| f >= DELTA_STAR).map(|k| {
        if k == 0 {
            times[0]
        } else {
            let (fa, fb) = (frac.direct[k - 1], frac.direct[k]);
            times[k - 1] + (DELTA_STAR - fa) / (fb - fa) * (times[k] - times[k - 1])
        }
    });
    let logs: Vec<f64> = l2.iter().map(|v| 2.0 * v.ln()).collect();
    let restart = restart_time(&times, &logs);
    let mut checked = 0;
    let mut holds = t0.is_some() && restart.is_some();
    if let (Some(_), Some(tr)) = (t0, restart.filter(|t| *t > 0.0)) {
        let t_end = *times.last().expect("nonempty series");
        let mut m = 1;
        while m as f64 * tr <= t_end {
            let v = interpolate(&times, &logs, m as f64 * tr);
            let bound = logs[0] + m as f64 * (1.0 - 2.0 * DELTA_STAR).ln();
            holds &= v <= bound + HALVING_SLACK.ln_1p();
            checked += 1;
            m += 1;
        }
    }
    Ok(EnhancementReport {
        lambda,
        rate,
        delta_star: DELTA_STAR,
        t0,
        restart_time: restart,
        forward_holds: t0.is_some(),
        halving_checked: checked,
        halving_holds: holds,
    })
}

/// First time at or after `from` where the piecewise-linear `g` reaches `y`.
fn first_reach(times: &[f64], g: &[f64], from: f64, y: f64) -> Option<f64> {
    let start = times.iter().position(|&t| t > from)?;
    let mut prev = (from, interpolate(times, g, from));
    if prev.1 <= y {
        return Some(from);
    }
    for k in start..times.len() {
        if g[k] <= y {
            let w = (prev.1 - y) / (prev.1 - g[k]);
            return Some(prev.0 + w * (times[k] - prev.0));
        }
        prev = (times[k], g[k]);
    }
    None
}

/// Sup over start times of the halving time of `e^g`, restricted to starts
/// whose halving is reached inside the series. Between the candidate starts
/// (records and preimages of records) the halving time is linear.
fn restart_time(times: &[f64], g: &[f64]) -> Option<f64> {
    let drop = -(1.0 - 2.0 * DELTA_STAR).ln();
    let mut starts = times.to_vec();
    for &gk in g {
        if let Some(s) = first_reach(times, g, times[0], gk + drop) {
            starts.push(s);
        }
    }
    let mut best: Option<f64> = None;
    for s in starts {
        let target = interpolate(times, g, s) - drop;
        if let Some(t) = first_reach(times, g, s, target) {
            best = Some(best.map_or(t - s, |b: f64| b.max(t - s)));
        }
    }
    best
}

/// `g(t) = −log(‖θ(t)‖_{Ḣ⁻¹}/‖θ₀‖_{Ḣ⁻¹}) / ∫₀ᵗ‖∇u‖_{L^p}`; zero where the
/// numerator vanishes.
pub fn mixing_rate_vs_budget(series: &SimulationSeries, gradient: &GradientNorm) -> Result<Vec<(f64, f64)>> {
    let Some(first) = series.records.first() else {
        return Err(Error::domain("empty series"));
    };
    if !(first.h1neg > 0.0) {
        return Err(Error::domain("initial H^-1 norm vanishes"));
    }
    let mut out = Vec::with_capacity(series.records.len());
    let mut acc = 0.0;
    let mut last_t = first.t;
    for r in &series.records[1..] {
        acc += gradient.integral(last_t, r.t);
        last_t = r.t;
        let num = -(r.h1neg / first.h1neg).ln();
        let g = if num.abs() <= 1e-14 {
            0.0
        } else if acc > 0.0 {
            num / acc
        } else {
            f64::INFINITY
        };
        out.push((r.t, g));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub kappa: f64,
    #[serde(rename = "D")]
    pub rate: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub beta: f64,
    pub beta_stderr: f64,
    pub points: Vec<ScalingPoint>,
    #[serde(skip)]
    pub s: f64,
}

impl ScalingFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }

    /// `max c_i / min c_i`.
    pub fn c_spread(&self) -> f64 {
        let max = self.points.iter().map(|p| p.c).fold(f64::NEG_INFINITY, f64::max);
        let min = self.points.iter().map(|p| p.c).fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Regression of `log D_i` on `log log(1/κ_i)`; `β` is minus the slope and
/// `c_i = D_i log^{s/(s−1)}(1/κ_i)`.
pub fn scaling_fit(points: &[(f64, f64)], s: f64) -> Result<ScalingFit> {
    if !(s > 1.0) {
        return Err(Error::domain("scaling fit needs s > 1"));
    }
    if points.len() < 4 {
        return Err(Error::domain(format!("scaling fit needs at least 4 points, got {}", points.len())));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.iter().any(|&(k, d)| !(k > 0.0 && k < 1.0) || !(d > 0.0 && d.is_finite())) {
        return Err(Error::domain("scaling fit needs 0 < kappa < 1 and positive finite rates"));
    }
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::domain("kappa values must be distinct"));
    }
    if pts[pts.len() - 1].0 / pts[0].0 < 100.0 * (1.0 - 1e-12) {
        return Err(Error::domain("kappa values must span at least two decades"));
    }
    let x: Vec<f64> = pts.iter().map(|p| (1.0 / p.0).ln().ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (_, slope, _, stderr) = linear_fit(&x, &y);
    let e = log_exponent(s);
    Ok(ScalingFit {
        beta: -slope,
        beta_stderr: stderr,
        points: pts
            .iter()
            .map(|&(kappa, rate)| ScalingPoint { kappa, rate, c: rate * (1.0 / kappa).ln().powf(e) })
            .collect(),
        s,
    })
}

/// `g(t) = ‖θ(t) − θ^κ(t)‖_{Ḣ⁻¹}` between a transport run and a diffusive
/// run from the same data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportDiffusiveGap {
    pub kappa: f64,
    pub alpha: f64,
    pub samples: Vec<(f64, f64)>,
}

impl TransportDiffusiveGap {
    /// `g(t)²/κ^{1−α}`.
    pub fn scaled(&self) -> Vec<(f64, f64)> {
        let d = self.kappa.powf(1.0 - self.alpha);
        self.samples.iter().map(|&(t, g)| (t, g * g / d)).collect()
    }

    /// Gap at the recorded time nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.samples
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map_or(f64::NAN, |s| s.1)
    }
}

/// Runs the transport and advection-diffusion problems side by side on the
/// grid of `config` (whose `kappa` is the diffusive run's).
pub fn compare_transport_diffusive(
    theta0: &ScalarField,
    protocol: &VelocityProtocol,
    config: &SolverConfig,
    horizon: f64,
    alpha: f64,
) -> Result<TransportDiffusiveGap> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let samples = h1neg_gap(theta0, protocol, config, 0.0, horizon)?;
    Ok(TransportDiffusiveGap { kappa: config.kappa, alpha, samples })
}

#[cfg(test)]
mod tests;
