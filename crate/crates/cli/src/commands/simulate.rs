use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use smix_core::solver::{energy_identity_residual, lq_identity_residual, solve, SimulationSeries};
use smix_core::spectral::snapshot::save_snapshot;

use super::{create_dir, finite_or_string, sha256_hex, write_file, Manifest};
use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{CliError, CliResult};
use crate::ARTIFACT_VERSION;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CONFIG_FILE: &str = "config.ini";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub kappa: f64,
    pub series: SimulationSeries,
    pub manifest: Manifest,
}

/// One run of the configured experiment into `out`. The solver section must
/// hold a single diffusivity.
pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> CliResult<RunOutcome> {
    match config.solver.kappas.as_slice() {
        [_] => run_single(config, 0, out),
        list => Err(CliError::Config(format!(
            "simulate takes one kappa, the config lists {}; use `sweep` for several",
            list.len()
        ))),
    }
}

/// Runs the `index`-th diffusivity of the configuration into `dir`.
pub(crate) fn run_single(config: &ExperimentConfig, index: usize, dir: &Path) -> CliResult<RunOutcome> {
    let mut used = config.clone();
    used.solver = config.solver.single(index);
    let kappa = used.solver.kappas[0];
    let config_text = used.to_text();
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), &config_text)?;

    let protocol = used.protocol()?;
    let solver = used.solver.run_config(0);
    let theta0 = used.initial.build(solver.n)?;
    let (series, failure) = match solve(&theta0, &protocol, &solver, used.solver.horizon) {
        Ok(s) => (s, None),
        Err(smix_core::Error::Underresolved { t, scale, threshold, partial }) => {
            let msg = format!(
                "under-resolved at t = {t:.4} (filament scale {scale:.3e} < {threshold:.3e}); partial results kept in {}",
                dir.display()
            );
            (*partial, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };

    let mut m = Manifest::default();
    m.push("artifact", "smix");
    m.push("version", ARTIFACT_VERSION);
    m.push("config", CONFIG_FILE);
    m.push("config_sha256", sha256_hex(config_text.as_bytes()));
    m.push_num("kappa", kappa);
    m.push("n", solver.n);
    m.push_num("dt", used.solver.dt);
    m.push_num("horizon", used.solver.horizon);
    m.push("scheme", &series.scheme);
    m.push("seed", used.seed().map_or("none".to_string(), |s| s.to_string()));
    m.push("status", if failure.is_some() { "underresolved" } else { "complete" });
    m.push("records", series.records.len());
    m.push_num("t_final", series.records.last().map_or(0.0, |r| r.t));

    let (p, s, horizon) = match used.budget {
        Some(b) => (b.p, b.s, b.horizon),
        None => (f64::INFINITY, f64::INFINITY, used.solver.horizon),
    };
    if horizon > 0.0 {
        let report = protocol.budget(p, s, horizon)?;
        m.push_num("budget_p", p);
        m.push_num("budget_s", s);
        m.push_num("budget_horizon", horizon);
        m.push_num("budget_value", report.value);
    }
    m.push_num("flow_scale_factor", protocol.normalization.map_or(1.0, |n| n.factor));

    let mut summary = serde_json::Map::new();
    if let (Some(first), Some(last)) = (series.records.first(), series.records.last()) {
        let drift = |a: f64, b: f64| if a > 0.0 { (b - a).abs() / a } else { 0.0 };
        let mut rows: Vec<(&str, f64)> = vec![
            ("l2_initial", first.l2),
            ("l2_final", last.l2),
            ("l2_drift", drift(first.l2, last.l2)),
            ("lq_initial", first.lq),
            ("lq_final", last.lq),
            ("lq_drift", drift(first.lq, last.lq)),
            ("tail_fraction_max", series.max_tail_fraction()),
        ];
        if kappa > 0.0 {
            rows.push(("energy_residual_max", max_residual(&energy_identity_residual(&series, kappa)?)));
            rows.push(("lq_residual_max", max_residual(&lq_identity_residual(&series, kappa, series.q)?)));
        }
        for (k, v) in rows {
            m.push_num(k, v);
            summary.insert(k.to_string(), finite_or_string(v));
        }
        m.push_num("q", series.q);
    }

    let formats = &used.output.formats;
    if formats.contains(&OutputFormat::Csv) {
        write_file(&dir.join(DIAGNOSTICS_FILE), series.to_csv_string())?;
        m.push("diagnostics", DIAGNOSTICS_FILE);
    }
    if formats.contains(&OutputFormat::Snapshots) {
        let snap_dir = dir.join("snapshots");
        create_dir(&snap_dir)?;
        let mut index = String::from("file,t\n");
        for (k, (t, field)) in series.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:05}.bin");
            save_snapshot(snap_dir.join(&name), field)?;
            let _ = writeln!(index, "{name},{t:?}");
        }
        if let (Some(field), Some(last)) = (&series.final_field, series.records.last()) {
            save_snapshot(snap_dir.join("final.bin"), field)?;
            let _ = writeln!(index, "final.bin,{:?}", last.t);
        }
        write_file(&snap_dir.join("index.csv"), index)?;
        m.push("snapshots", "snapshots/index.csv");
    }
    if formats.contains(&OutputFormat::Json) {
        summary.insert("kappa".into(), serde_json::json!(kappa));
        summary.insert("n".into(), serde_json::json!(solver.n));
        summary.insert("status".into(), serde_json::json!(m.get("status")));
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(summary)).expect("json");
        write_file(&dir.join(SUMMARY_FILE), text + "\n")?;
    }
    write_file(&dir.join(MANIFEST_FILE), m.to_text())?;

    match failure {
        Some(msg) => Err(CliError::Invariant(msg)),
        None => Ok(RunOutcome { dir: dir.to_path_buf(), kappa, series, manifest: m }),
    }
}

fn max_residual(r: &[(f64, f64)]) -> f64 {
    r.iter().map(|x| x.1).fold(0.0, f64::max)
}
