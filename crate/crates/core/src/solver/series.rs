use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Diagnostics, SolverConfig};
use crate::flow::VelocityProtocol;
use crate::spectral::ScalarField;
use crate::{Error, Result};

/// Header of the diagnostics CSV.
pub const CSV_HEADER: &str = "t,l2,lq,h1neg,grad_l2,grad_l1,diss_cum";

/// Diagnostics at one recorded time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub l2: f64,
    pub lq: f64,
    pub h1neg: f64,
    pub grad_l2: f64,
    pub grad_l1: f64,
    /// `κ∫₀ᵗ‖∇θ‖²_{L²}`.
    pub diss_cum: f64,
    /// `∫₀ᵗ‖∇θ‖²_{L²}`, accumulated every step with the RK4 stage weights.
    pub grad_sq_integral: f64,
    /// `∫|θ|^{q−2}|∇θ|²` at this time.
    pub lq_integrand: f64,
    /// Trapezoid-rule time integral of `lq_integrand` over the records.
    pub lq_integral: f64,
    pub tail_fraction: f64,
}

/// Time-stamped diagnostics of one run.
#[derive(Clone, Debug, Default)]
pub struct SimulationSeries {
    pub n: usize,
    pub dt: f64,
    pub kappa: f64,
    pub q: f64,
    pub horizon: f64,
    pub scheme: String,
    pub records: Vec<DiagnosticRecord>,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_field: Option<ScalarField>,
    /// Solver settings and the flow block, as `key = value` text.
    pub provenance: String,
}

impl SimulationSeries {
    pub(crate) fn new(config: &SolverConfig, protocol: &VelocityProtocol, horizon: f64) -> Self {
        let mut provenance = String::from("[solver]\n");
        for (k, v) in [
            ("n", config.n.to_string()),
            ("dt", config.dt.to_string()),
            ("kappa", config.kappa.to_string()),
            ("horizon", horizon.to_string()),
            ("scheme", config.scheme.name().to_string()),
            ("dealias", config.dealias.to_string()),
            ("q", config.q.to_string()),
            ("diagnostic_cadence", config.diagnostic_cadence.to_string()),
        ] {
            provenance.push_str(&format!("{k} = {v}\n"));
        }
        provenance.push_str(&protocol.config_block());
        SimulationSeries {
            n: config.n,
            dt: config.dt,
            kappa: config.kappa,
            q: config.q,
            horizon,
            scheme: config.scheme.name().to_string(),
            provenance,
            ..Default::default()
        }
    }

    pub(crate) fn push(&mut self, t: f64, d: Diagnostics, grad_sq_integral: f64) {
        let lq_integral = match self.records.last() {
            Some(prev) => prev.lq_integral + 0.5 * (t - prev.t) * (prev.lq_integrand + d.lq_integrand),
            None => 0.0,
        };
        self.records.push(DiagnosticRecord {
            t,
            l2: d.l2,
            lq: d.lq,
            h1neg: d.h1neg,
            grad_l2: d.grad_l2,
            grad_l1: d.grad_l1,
            diss_cum: self.kappa * grad_sq_integral,
            grad_sq_integral,
            lq_integrand: d.lq_integrand,
            lq_integral,
            tail_fraction: d.tail_fraction,
        });
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn l2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l2).collect()
    }

    pub fn h1neg(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h1neg).collect()
    }

    /// Values of a named column (`l2`, `lq`, `h1neg`, `grad_l2`, `grad_l1`,
    /// `diss_cum`, `tail_fraction`).
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let pick: fn(&DiagnosticRecord) -> f64 = match name {
            "t" => |r| r.t,
            "l2" => |r| r.l2,
            "lq" => |r| r.lq,
            "h1neg" => |r| r.h1neg,
            "grad_l2" => |r| r.grad_l2,
            "grad_l1" => |r| r.grad_l1,
            "diss_cum" => |r| r.diss_cum,
            "tail_fraction" => |r| r.tail_fraction,
            other => return Err(Error::config(format!("unknown diagnostic column {other:?}"))),
        };
        Ok(self.records.iter().map(pick).collect())
    }

    /// Largest spectral tail fraction seen during the run.
    pub fn max_tail_fraction(&self) -> f64 {
        self.records.iter().map(|r| r.tail_fraction).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.t, r.l2, r.lq, r.h1neg, r.grad_l2, r.grad_l1, r.diss_cum
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Parses a diagnostics CSV back into a series. Only the columns in
    /// [`CSV_HEADER`] are restored; `grad_sq_integral` is recovered from
    /// `diss_cum` when `kappa > 0`.
    pub fn from_csv(text: &str, kappa: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Format(format!("diagnostics csv must start with {CSV_HEADER}"))),
        }
        let mut series = SimulationSeries { kappa, ..Default::default() };
        for (no, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", no + 2)))?;
            if v.len() != 7 {
                return Err(Error::Format(format!("line {}: expected 7 columns", no + 2)));
            }
            series.records.push(DiagnosticRecord {
                t: v[0],
                l2: v[1],
                lq: v[2],
                h1neg: v[3],
                grad_l2: v[4],
                grad_l1: v[5],
                diss_cum: v[6],
                grad_sq_integral: if kappa > 0.0 { v[6] / kappa } else { 0.0 },
                lq_integrand: f64::NAN,
                lq_integral: f64::NAN,
                tail_fraction: f64::NAN,
            });
        }
        Ok(series)
    }
}

/// `r(t) = |‖θ(t)‖² + 2κ∫₀ᵗ‖∇θ‖² − ‖θ₀‖²| / ‖θ₀‖²` at every record.
pub fn energy_identity_residual(series: &SimulationSeries, kappa: f64) -> Result<Vec<(f64, f64)>> {
    if !(kappa > 0.0) || !(series.kappa > 0.0) {
        return Err(Error::domain("the energy identity needs a kappa > 0 series"));
    }
    let first = series.records.first().ok_or_else(|| Error::domain("empty series"))?;
    let e0 = first.l2 * first.l2;
    Ok(series
        .records
        .iter()
        .map(|r| (r.t, (r.l2 * r.l2 + 2.0 * kappa * r.grad_sq_integral - e0).abs() / e0))
        .collect())
}

/// Residual of `‖θ(t)‖_q^q + κq(q−1)∫₀ᵗ∫|θ|^{q−2}|∇θ|² = ‖θ₀‖_q^q`, relative
/// to `‖θ₀‖_q^q`, at every record. For `q = 2` this is
/// [`energy_identity_residual`].
pub fn lq_identity_residual(series: &SimulationSeries, kappa: f64, q: f64) -> Result<Vec<(f64, f64)>> {
    if q.is_nan() || q <= 1.0 || q.is_infinite() {
        return Err(Error::domain(format!("the L^q identity needs 1 < q < inf, got {q}")));
    }
    if q == 2.0 {
        return energy_identity_residual(series, kappa);
    }
    if !(kappa > 0.0) || !(series.kappa > 0.0) {
        return Err(Error::domain("the L^q identity needs a kappa > 0 series"));
    }
    if q != series.q {
        return Err(Error::config(format!("series records q = {}, not {q}", series.q)));
    }
    if q < 2.0 {
        return Err(Error::domain("the dissipation integrand is only accumulated for q >= 2"));
    }
    let first = series.records.first().ok_or_else(|| Error::domain("empty series"))?;
    let m0 = first.lq.powf(q);
    Ok(series
        .records
        .iter()
        .map(|r| (r.t, (r.lq.powf(q) + kappa * q * (q - 1.0) * r.lq_integral - m0).abs() / m0))
        .collect())
}
