use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smix_core::diagnostics::{batchelor_scale, crossover_time, fit_exponential_rate, theoretical_t, RateFit};
use smix_core::solver::SimulationSeries;

use super::simulate::{CONFIG_FILE, DIAGNOSTICS_FILE, MANIFEST_FILE};
use super::{create_dir, finite_or_string, read_file, write_file, Manifest};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const NORMS_FILE: &str = "norms_vs_time.csv";
pub const RATE_FILE: &str = "rate_vs_kappa.csv";
pub const BATCHELOR_FILE: &str = "batchelor.csv";
pub const CROSSOVER_FILE: &str = "crossover.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub kappa: f64,
    pub n: usize,
    pub records: usize,
    pub l2_monotone: bool,
    pub fit: Option<RateFit>,
    pub crossover: serde_json::Value,
    pub theoretical_t: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportSummary {
    pub runs: Vec<RunSummary>,
    pub files: Vec<String>,
}

struct Run {
    label: String,
    kappa: f64,
    s: f64,
    config: ExperimentConfig,
    series: SimulationSeries,
}

fn is_run_dir(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file() && dir.join(DIAGNOSTICS_FILE).is_file()
}

/// Run directories named directly or one level below (sweep outputs).
fn discover(dirs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut found = Vec::new();
    for dir in dirs {
        if is_run_dir(dir) {
            found.push(dir.clone());
            continue;
        }
        let entries = std::fs::read_dir(dir).map_err(CliError::io(dir))?;
        let mut subs: Vec<PathBuf> =
            entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir() && is_run_dir(p)).collect();
        if subs.is_empty() {
            return Err(CliError::Usage(format!("{} contains no run directories", dir.display())));
        }
        subs.sort();
        found.extend(subs);
    }
    Ok(found)
}

fn load_run(dir: &Path) -> CliResult<Run> {
    let manifest = Manifest::parse(&read_file(&dir.join(MANIFEST_FILE))?);
    let config_path = dir.join(CONFIG_FILE);
    let config = ExperimentConfig::parse(&read_file(&config_path)?, &config_path.display().to_string())?;
    let kappa = manifest
        .get_f64("kappa")
        .ok_or_else(|| CliError::Config(format!("{}: manifest lacks kappa", dir.display())))?;
    let series = SimulationSeries::from_csv(&read_file(&dir.join(DIAGNOSTICS_FILE))?, kappa)?;
    if series.records.is_empty() {
        return Err(CliError::Config(format!("{}: empty diagnostics", dir.display())));
    }
    let label = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    let s = config.budget.map_or(f64::INFINITY, |b| b.s);
    Ok(Run { label, kappa, s, config, series })
}

/// Gnuplot-ready CSVs for every figure plus `summary.json`.
pub fn cmd_report(dirs: &[PathBuf], out: &Path) -> CliResult<ReportSummary> {
    if dirs.is_empty() {
        return Err(CliError::Usage("report needs at least one run directory".into()));
    }
    let runs: Vec<Run> = discover(dirs)?.iter().map(|d| load_run(d)).collect::<CliResult<_>>()?;
    create_dir(out)?;

    let mut norms = String::from("run,kappa,t,l2,l2_relative,h1neg,grad_l2\n");
    let mut rates = String::from("kappa,log_inv_kappa,D,r_squared,window_start,window_end\n");
    let mut batchelor = String::from("kappa,t,ell,predicted,ratio\n");
    let mut crossover = String::from("kappa,crossover,theoretical_t,ratio\n");
    let mut summaries = Vec::new();
    for run in &runs {
        let recs = &run.series.records;
        let l0 = recs[0].l2;
        for r in recs {
            let rel = if l0 > 0.0 { r.l2 / l0 } else { 0.0 };
            let _ = writeln!(norms, "{},{:?},{:?},{:?},{:?},{:?},{:?}", run.label, run.kappa, r.t, r.l2, rel, r.h1neg, r.grad_l2);
        }
        let fit = fit_exponential_rate(&run.series, "l2", run.config.diagnostics.window).ok();
        let in_range = run.kappa > 0.0 && run.kappa < 1.0;
        if let (Some(f), true) = (&fit, in_range) {
            let _ = writeln!(
                rates,
                "{:?},{:?},{:?},{:?},{:?},{:?}",
                run.kappa,
                (1.0 / run.kappa).ln(),
                f.rate,
                f.r_squared,
                f.window[0],
                f.window[1]
            );
        }
        let t_theory = theoretical_t(run.kappa, run.s);
        let t_cross = crossover_time(&run.series);
        if in_range {
            let predicted = (run.kappa * t_theory).sqrt();
            for (t, ell) in batchelor_scale(&run.series)? {
                let _ = writeln!(batchelor, "{:?},{:?},{:?},{:?},{:?}", run.kappa, t, ell, predicted, ell / predicted);
            }
            let _ = writeln!(crossover, "{:?},{:?},{:?},{:?}", run.kappa, t_cross, t_theory, t_cross / t_theory);
        }
        summaries.push(RunSummary {
            label: run.label.clone(),
            kappa: run.kappa,
            n: run.config.solver.n[0],
            records: recs.len(),
            l2_monotone: recs.windows(2).all(|w| w[1].l2 <= w[0].l2),
            fit,
            crossover: finite_or_string(t_cross),
            theoretical_t: finite_or_string(t_theory),
        });
    }
    let mut files = Vec::new();
    for (name, body) in [(NORMS_FILE, norms), (RATE_FILE, rates), (BATCHELOR_FILE, batchelor), (CROSSOVER_FILE, crossover)] {
        write_file(&out.join(name), body)?;
        files.push(name.to_string());
    }
    files.push(SUMMARY_FILE.to_string());
    let summary = ReportSummary { runs: summaries, files };
    write_file(&out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary).expect("json") + "\n")?;
    Ok(summary)
}
