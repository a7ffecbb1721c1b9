use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use smix_core::diagnostics::{
    batchelor_plateau, crossover_time, enhancement_report, fit_exponential_rate, scaling_fit, theoretical_t,
    BatchelorPlateau, EnhancementReport, RateFit, ScalingFit,
};

use super::simulate::run_single;
use super::{create_dir, write_file, RunOutcome};
use crate::config::{ExperimentConfig, SweepMode};
use crate::error::{CliError, CliResult};

pub const REPORT_FILE: &str = "sweep_report.json";
pub const PARTIAL_FILE: &str = "sweep_partial.json";
/// Largest acceptable relative energy-identity residual.
pub const ENERGY_RESIDUAL_TOL: f64 = 1e-4;
/// Largest acceptable `max c_i / min c_i`.
pub const C_SPREAD_TOL: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRun {
    pub kappa: f64,
    pub dir: Option<String>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    pub crossover: serde_json::Value,
    pub theoretical_t: f64,
    pub plateau: Option<BatchelorPlateau>,
    pub enhancement: Option<EnhancementReport>,
    pub energy_residual_max: Option<f64>,
}

impl SweepRun {
    pub fn rate(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.rate)
    }
}

/// One asserted invariant with its measured margin (`margin ≥ 0` passes).
#[derive(Clone, Debug, Serialize)]
pub struct LedgerEntry {
    pub name: String,
    pub kappa: Option<f64>,
    pub measured: f64,
    pub threshold: f64,
    pub margin: f64,
    pub passed: bool,
}

impl LedgerEntry {
    fn at_most(name: &str, kappa: Option<f64>, measured: f64, threshold: f64) -> Self {
        let margin = threshold - measured;
        LedgerEntry { name: name.into(), kappa, measured, threshold, margin, passed: margin >= 0.0 }
    }

    fn at_least(name: &str, kappa: Option<f64>, measured: f64, threshold: f64) -> Self {
        let margin = measured - threshold;
        LedgerEntry { name: name.into(), kappa, measured, threshold, margin, passed: margin >= 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub mode: String,
    pub s: String,
    pub runs: Vec<SweepRun>,
    pub scaling: Option<ScalingFit>,
    pub scaling_error: Option<String>,
    pub c_spread: Option<f64>,
    pub ledger: Vec<LedgerEntry>,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.ledger.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&LedgerEntry> {
        self.ledger.iter().filter(|e| !e.passed).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }
}

/// Subdirectory of a sweep holding the run at `kappa`.
pub fn run_dir_name(index: usize, kappa: f64) -> String {
    format!("run_{index:02}_kappa_{kappa:e}")
}

/// Runs every diffusivity of the list (concurrently, on `threads` workers)
/// and writes the aggregated report to `out`.
pub fn cmd_sweep(config: &ExperimentConfig, out: &Path, threads: usize) -> CliResult<SweepReport> {
    let kappas = &config.solver.kappas;
    if kappas.len() < 4 {
        return Err(CliError::Config(format!(
            "a sweep needs at least 4 kappa values to fit a scaling law, got {}",
            kappas.len()
        )));
    }
    if kappas.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
        return Err(CliError::Config("sweep diffusivities must lie in (0, 1)".into()));
    }
    let s = config.budget.map_or(f64::INFINITY, |b| b.s);
    create_dir(out)?;

    let report = match config.sweep {
        SweepMode::Synthetic { beta, prefactor } => synthetic(kappas, s, beta, prefactor),
        SweepMode::Run => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {threads} worker threads: {e}")))?;
            let jobs: Vec<(usize, f64, PathBuf)> =
                kappas.iter().enumerate().map(|(i, &k)| (i, k, out.join(run_dir_name(i, k)))).collect();
            let results: Vec<CliResult<RunOutcome>> =
                pool.install(|| jobs.par_iter().map(|(i, _, dir)| run_single(config, *i, dir)).collect());
            if results.iter().any(|r| r.is_err()) {
                return Err(abort_with_partial(out, &jobs, &results, config, s));
            }
            let outcomes: Vec<RunOutcome> = results.into_iter().map(|r| r.expect("checked")).collect();
            analyse(&outcomes, config, s, out)
        }
    };
    write_file(&out.join(REPORT_FILE), report.to_json() + "\n")?;
    Ok(report)
}

fn synthetic(kappas: &[f64], s: f64, beta: f64, prefactor: f64) -> SweepReport {
    let points: Vec<(f64, f64)> =
        kappas.iter().map(|&k| (k, prefactor * (1.0 / k).ln().powf(-beta))).collect();
    let runs = points
        .iter()
        .map(|&(kappa, rate)| SweepRun {
            kappa,
            dir: None,
            fit: Some(RateFit {
                rate,
                prefactor: 1.0,
                window: [0.0, 0.0],
                r_squared: 1.0,
                norm_name: "l2".into(),
                samples: 0,
            }),
            fit_error: None,
            crossover: serde_json::Value::Null,
            theoretical_t: theoretical_t(kappa, s),
            plateau: None,
            enhancement: None,
            energy_residual_max: None,
        })
        .collect();
    finish("synthetic", runs, &points, s, Vec::new())
}

fn analyse(outcomes: &[RunOutcome], config: &ExperimentConfig, s: f64, out: &Path) -> SweepReport {
    let mut ledger = Vec::new();
    let mut runs = Vec::new();
    for o in outcomes {
        let kappa = o.kappa;
        let (fit, fit_error) = match fit_exponential_rate(&o.series, "l2", config.diagnostics.window) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let min_r2 = match config.diagnostics.window {
            smix_core::diagnostics::FitWindow::Late { min_r_squared, .. } => min_r_squared,
            _ => 0.95,
        };
        ledger.push(LedgerEntry::at_least("fit_r_squared", Some(kappa), fit.as_ref().map_or(f64::NAN, |f| f.r_squared), min_r2));
        let energy = o.manifest.get_f64("energy_residual_max");
        if let Some(e) = energy {
            ledger.push(LedgerEntry::at_most("energy_identity_residual", Some(kappa), e, ENERGY_RESIDUAL_TOL));
        }
        let enhancement = enhancement_report(&o.series, kappa).ok();
        if let Some(r) = enhancement.as_ref().filter(|r| r.halving_checked > 0) {
            ledger.push(LedgerEntry::at_least(
                "iterated_halving",
                Some(kappa),
                if r.halving_holds { 1.0 } else { 0.0 },
                1.0,
            ));
        }
        let dir = o.dir.strip_prefix(out).unwrap_or(&o.dir).display().to_string();
        runs.push(SweepRun {
            kappa,
            dir: Some(dir),
            fit,
            fit_error,
            crossover: super::finite_or_string(crossover_time(&o.series)),
            theoretical_t: theoretical_t(kappa, s),
            plateau: batchelor_plateau(&o.series, kappa, s).ok(),
            enhancement,
            energy_residual_max: energy,
        });
    }
    let points: Vec<(f64, f64)> = runs.iter().filter_map(|r| Some((r.kappa, r.rate()?))).collect();

    // D must not increase as kappa decreases
    let mut by_kappa: Vec<&SweepRun> = runs.iter().collect();
    by_kappa.sort_by(|a, b| b.kappa.total_cmp(&a.kappa));
    for w in by_kappa.windows(2) {
        if let (Some(a), Some(b)) = (w[0].rate(), w[1].rate()) {
            ledger.push(LedgerEntry::at_most("rate_nonincreasing", Some(w[1].kappa), b, a));
        }
    }
    finish("run", runs, &points, s, ledger)
}

fn finish(mode: &str, runs: Vec<SweepRun>, points: &[(f64, f64)], s: f64, mut ledger: Vec<LedgerEntry>) -> SweepReport {
    let (scaling, scaling_error) = match scaling_fit(points, s) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let c_spread = scaling.as_ref().map(ScalingFit::c_spread);
    ledger.push(LedgerEntry::at_most("c_spread", None, c_spread.unwrap_or(f64::NAN), C_SPREAD_TOL));
    SweepReport { mode: mode.into(), s: s.to_string(), runs, scaling, scaling_error, c_spread, ledger }
}

fn abort_with_partial(
    out: &Path,
    jobs: &[(usize, f64, PathBuf)],
    results: &[CliResult<RunOutcome>],
    config: &ExperimentConfig,
    s: f64,
) -> CliError {
    let mut failures = Vec::new();
    let mut completed = Vec::new();
    for ((_, kappa, dir), r) in jobs.iter().zip(results) {
        match r {
            Ok(o) => completed.push(o.clone()),
            Err(e) => failures.push(serde_json::json!({
                "kappa": kappa,
                "dir": dir.strip_prefix(out).unwrap_or(dir).display().to_string(),
                "error": e.to_string(),
                "exit_code": e.exit_code(),
            })),
        }
    }
    let partial = analyse(&completed, config, s, out);
    let doc = serde_json::json!({ "failed_runs": failures, "completed": partial });
    let note = match write_file(&out.join(PARTIAL_FILE), serde_json::to_string_pretty(&doc).expect("json") + "\n") {
        Ok(()) => format!("partial results in {}", out.join(PARTIAL_FILE).display()),
        Err(e) => format!("could not save partial results: {e}"),
    };
    let first = results.iter().find_map(|r| r.as_ref().err()).expect("a failure");
    let msg = format!("{} of {} sweep runs failed (first: {first}); {note}", failures.len(), jobs.len());
    match first.exit_code() {
        crate::error::EXIT_INVARIANT => CliError::Invariant(msg),
        _ => CliError::Config(msg),
    }
}
