use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smix::commands::{cmd_krdist, cmd_report, cmd_simulate, cmd_sweep, KrInput, KrRequest, Manifest};
use smix::{load_config, resolve_threads, CliError, ExperimentConfig};
use smix_core::kr::KrMethod;
use smix_core::solver::SimulationSeries;
use tempfile::TempDir;

const HEAT: &str = "\
[flow]
kind = steady-shear
amplitude = 0

[solver]
n = 32
dt = 0.001
kappa = 0.01
horizon = 1
";

const TRANSPORT: &str = "\
[flow]
kind = alternating-sine
seed = 5
switching_period = 0.25
amplitude = 1

[budget]
p = inf
s = inf
horizon = 1

[solver]
n = 128
dt = 0.01
kappa = 0
horizon = 1
";

const SWEEP: &str = "\
[flow]
kind = cellular
amplitude = 1

[initial]
kind = two-modes

[solver]
n = 64
dt = 0.005
kappa = 0.1, 0.05, 0.02, 0.01
horizon = 1.5
diagnostic_cadence = 5
";

fn smix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smix")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, "test.ini").unwrap()
}

#[test]
fn heat_run_matches_the_eigenfunction_decay() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("heat");
    cmd_simulate(&parse(HEAT), &out).unwrap();
    let series = SimulationSeries::from_csv(&fs::read_to_string(out.join("diagnostics.csv")).unwrap(), 0.01).unwrap();
    assert!(series.records.len() > 10);
    for r in &series.records {
        let exact = (-4.0 * PI * PI * 0.01 * r.t).exp() / 2f64.sqrt();
        assert!((r.l2 - exact).abs() <= 1e-6 * exact, "t = {}: {} vs {exact}", r.t, r.l2);
    }
    let manifest = Manifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap());
    let config_text = fs::read_to_string(out.join("config.ini")).unwrap();
    assert_eq!(manifest.get("config_sha256").unwrap(), smix::commands::sha256_hex(config_text.as_bytes()));
    assert_eq!(manifest.get("version").unwrap(), smix::ARTIFACT_VERSION);
    assert!(manifest.get_f64("budget_value").is_some());
    assert_eq!(parse(&config_text), parse(HEAT));
    assert!(manifest.get_f64("energy_residual_max").unwrap() < 1e-6);
}

#[test]
fn transport_run_records_lq_drift() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("transport");
    let outcome = cmd_simulate(&parse(TRANSPORT), &out).unwrap();
    let m = &outcome.manifest;
    assert_eq!(m.get("scheme"), Some("semi-lagrangian"));
    assert!((m.get_f64("budget_value").unwrap() - 1.0).abs() < 1e-9);
    let drift = m.get_f64("lq_drift").unwrap();
    assert!(drift <= 1e-3, "lq drift {drift}");
    assert!(m.get_f64("l2_drift").unwrap() <= 1e-3);
    let on_disk = Manifest::parse(&fs::read_to_string(out.join("manifest.txt")).unwrap());
    assert_eq!(&on_disk, m);
}

#[test]
fn repeated_simulations_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.ini", TRANSPORT);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let o = smix(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((fs::read(dir.join("diagnostics.csv")).unwrap(), fs::read(dir.join("manifest.txt")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_and_override_flags_change_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.ini", TRANSPORT);
    let c = load_config(&cfg, &["solver.horizon=0.5".into(), "solver.n = 64".into()], Some(11)).unwrap();
    assert_eq!(c.solver.horizon, 0.5);
    assert_eq!(c.solver.n, vec![64]);
    assert_eq!(c.seed(), Some(11));

    let dir = tmp.path().join("seeded");
    let o = smix(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "11",
        "--override",
        "solver.horizon=0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let used = parse(&fs::read_to_string(dir.join("config.ini")).unwrap());
    assert_eq!(used.seed(), Some(11));
    assert_eq!(used.solver.horizon, 0.5);
}

#[test]
fn bad_config_exits_with_code_two_and_a_line_number() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.ini", &HEAT.replace("dt = 0.001", "dt = soon"));
    let o = smix(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.ini:7"), "{err}");

    let o = smix(&["simulate", "--config", cfg.to_str().unwrap(), "--override", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    let o = smix(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_needs_four_kappas() {
    let tmp = TempDir::new().unwrap();
    let err = cmd_sweep(&parse(HEAT), tmp.path(), 1).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    let cfg = write_config(tmp.path(), "h.ini", HEAT);
    let o = smix(&["sweep", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synthetic_sweep_recovers_the_injected_exponent() {
    let tmp = TempDir::new().unwrap();
    for beta in [1.0, 1.5, 2.0] {
        let text = format!(
            "{}\n[sweep]\nmode = synthetic\nsynthetic_beta = {beta}\nsynthetic_prefactor = 0.7\n",
            SWEEP.replace("kappa = 0.1, 0.05, 0.02, 0.01", "kappa = 1e-2, 1e-3, 1e-4, 1e-5")
        );
        let report = cmd_sweep(&parse(&text), tmp.path(), 1).unwrap();
        let fit = report.scaling.as_ref().unwrap();
        assert!((fit.beta - beta).abs() < 1e-12, "{} vs {beta}", fit.beta);
        assert!(tmp.path().join("sweep_report.json").is_file());
    }
}

#[test]
fn sweep_runs_every_kappa_and_reports() {
    let tmp = TempDir::new().unwrap();
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    let config = parse(SWEEP);
    let report = cmd_sweep(&config, &one, 1).unwrap();
    cmd_sweep(&config, &two, 2).unwrap();
    assert_eq!(report.runs.len(), 4);
    for run in &report.runs {
        let dir = one.join(run.dir.as_ref().unwrap());
        assert!(dir.join("diagnostics.csv").is_file());
        let used = parse(&fs::read_to_string(dir.join("config.ini")).unwrap());
        assert_eq!(used.solver.kappas, vec![run.kappa]);
        let a = fs::read(dir.join("diagnostics.csv")).unwrap();
        let b = fs::read(two.join(run.dir.as_ref().unwrap()).join("diagnostics.csv")).unwrap();
        assert_eq!(a, b, "thread count changed the output at kappa {}", run.kappa);
    }
    let names: Vec<&str> = report.ledger.iter().map(|e| e.name.as_str()).collect();
    for required in ["fit_r_squared", "energy_identity_residual", "rate_nonincreasing", "c_spread"] {
        assert!(names.contains(&required), "ledger lacks {required}: {names:?}");
    }
    for e in &report.ledger {
        if e.measured.is_finite() {
            assert_eq!(e.passed, e.margin >= 0.0);
        }
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(one.join("sweep_report.json")).unwrap()).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 4);

    let figures = tmp.path().join("figures");
    let summary = cmd_report(&[one.clone()], &figures).unwrap();
    assert_eq!(summary.runs.len(), 4);
    for f in ["norms_vs_time.csv", "rate_vs_kappa.csv", "batchelor.csv", "crossover.csv", "summary.json"] {
        let text = fs::read_to_string(figures.join(f)).unwrap();
        assert!(text.lines().count() >= 2, "{f} is empty");
    }
}

#[test]
fn failed_sweep_run_keeps_partial_results() {
    let tmp = TempDir::new().unwrap();
    // 4/sqrt(1e-4) = 400 > 64: the last run is rejected as under-resolved
    let config = parse(&SWEEP.replace("0.02, 0.01", "0.02, 1e-4"));
    let err = cmd_sweep(&config, tmp.path(), 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let partial: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("sweep_partial.json")).unwrap()).unwrap();
    assert_eq!(partial["failed_runs"].as_array().unwrap().len(), 1);
    assert_eq!(partial["completed"]["runs"].as_array().unwrap().len(), 3);
    assert!(!tmp.path().join("sweep_report.json").exists());
}

#[test]
fn report_rejects_empty_input_and_summarises_a_heat_run() {
    let tmp = TempDir::new().unwrap();
    let err = cmd_report(&[], tmp.path()).unwrap_err();
    assert!(matches!(err, CliError::Usage(_)));
    let o = smix(&["report", "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let run = tmp.path().join("heat");
    cmd_simulate(&parse(&format!("{HEAT}[diagnostics]\nfit_window = full\n")), &run).unwrap();
    let summary = cmd_report(&[run], &tmp.path().join("fig")).unwrap();
    assert_eq!(summary.runs.len(), 1);
    assert!(summary.runs[0].l2_monotone);
    let fit = summary.runs[0].fit.as_ref().unwrap();
    assert!((fit.rate - 4.0 * PI * PI * 0.01).abs() < 1e-6);
}

#[test]
fn krdist_two_cell_fixture_through_the_binary() {
    let tmp = TempDir::new().unwrap();
    let fixture = write_config(tmp.path(), "cells.csv", "x,y,mass\n0.1,0.1,0.5\n0.35,0.1,-0.5\n");
    let out = tmp.path().join("kr");
    let plans = tmp.path().join("plans");
    let o = smix(&[
        "krdist",
        fixture.to_str().unwrap(),
        "--delta",
        "0.01,0.1,1",
        "--out",
        out.to_str().unwrap(),
        "--plan",
        plans.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("kr.json")).unwrap()).unwrap();
    let values: Vec<f64> = json.as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert!((values[1] - 0.626381).abs() < 1e-6);
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    let plan = fs::read_to_string(plans.join(smix::commands::krdist::plan_file_name(0.1))).unwrap();
    assert_eq!(plan.lines().count(), 2);
}

#[test]
fn krdist_entropic_agrees_with_exact_on_a_field() {
    let tmp = TempDir::new().unwrap();
    let field = smix_core::initial::random_modes(8, 4, 3).unwrap();
    let path = tmp.path().join("f.bin");
    smix_core::spectral::snapshot::save_snapshot(&path, &field).unwrap();
    let input = KrInput::load(&path).unwrap();
    let exact = cmd_krdist(&input, &KrRequest { deltas: vec![0.1], ..KrRequest::default() }, None).unwrap();
    let request = KrRequest { deltas: vec![0.1], method: KrMethod::Entropic, ..KrRequest::default() };
    let ent = cmd_krdist(&input, &request, None).unwrap();
    assert!((exact[0].value - ent[0].value).abs() <= 1e-3);

    let coarse = cmd_krdist(&input, &KrRequest { coarse: Some(4), ..KrRequest::default() }, None).unwrap();
    let err = coarse[0].coarsening_error.unwrap();
    assert!((coarse[0].value - exact[0].value).abs() <= err + 1e-12);
}

#[test]
fn snapshots_feed_krdist() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let text = format!("{}\n[output]\nformats = csv,snapshots\n", HEAT.replace("n = 32", "n = 16").replace("horizon = 1", "horizon = 0.1"));
    cmd_simulate(&parse(&text), &run).unwrap();
    assert!(run.join("snapshots/index.csv").is_file());
    let results = cmd_krdist(&KrInput::load(&run).unwrap(), &KrRequest::default(), None).unwrap();
    assert!(results[0].value > 0.0);
}

#[test]
fn check_command_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h.ini", HEAT);
    let o = smix(&["check", "--config", cfg.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    assert!(stdout.contains("config_round_trip"));
}

#[test]
fn thread_count_resolution() {
    assert_eq!(resolve_threads(Some(3), Some("8")).unwrap(), 3);
    assert_eq!(resolve_threads(None, Some("8")).unwrap(), 8);
    assert!(resolve_threads(None, None).unwrap() >= 1);
    assert!(resolve_threads(None, Some("many")).is_err());
    assert!(resolve_threads(Some(0), None).is_err());
}
