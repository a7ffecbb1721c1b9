use super::*;

const BASE: &str = "\
# heat run
[flow]
kind = steady-shear
amplitude = 0

[solver]
n = 32
dt = 0.001
kappa = 0.01
horizon = 1
";

fn line_of(err: CliError) -> usize {
    match err {
        CliError::ConfigAt { line, .. } => line,
        other => panic!("expected a line-anchored error, got {other}"),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let c = ExperimentConfig::parse(BASE, "base.ini").unwrap();
    assert!(c.flow.is_zero());
    assert_eq!(c.initial, InitialCondition::SineX);
    assert_eq!(c.solver.kappas, vec![0.01]);
    assert_eq!(c.solver.diagnostic_cadence, 10);
    assert_eq!(c.solver.scheme, SchemeChoice::Auto);
    assert_eq!(c.budget, None);
    assert_eq!(c.sweep, SweepMode::Run);
    assert_eq!(ExperimentConfig::parse(&BASE.replace("kappa = 0.01", "kappa = 0"), "z").unwrap().solver.run_config(0).scheme, Scheme::SemiLagrangian);
    assert_eq!(c.solver.run_config(0).scheme, Scheme::IntegratingFactorRk4);
}

#[test]
fn round_trip_is_lossless() {
    let text = "\
[flow]
kind = alternating-sine
seed = 7
switching_period = 0.5
amplitude = 2

[initial]
kind = random-modes
seed = 3
kmax = 6

[solver]
n = 64, 64, 128, 256
dt = 0.0025
kappa = 1e-2, 1e-3, 1e-4, 1e-5
horizon = 10
diagnostic_cadence = 4
snapshot_cadence = 20
scheme = integrating-factor-rk4
dealias = false
advection = pseudospectral
allow_underresolved = true

[budget]
p = inf
s = inf
horizon = 10

[diagnostics]
norms = l2,h1neg,grad_l2
deltas = 0.001, 0.1
fit_window = 2.5, 9
kr_method = entropic
kr_coarse = 16
epsilon = 0.002
alpha = 0.5

[output]
directory = runs/a
formats = csv,snapshots

[sweep]
mode = synthetic
synthetic_beta = 1.5
synthetic_prefactor = 0.3
";
    let a = ExperimentConfig::parse(text, "a.ini").unwrap();
    let b = ExperimentConfig::parse(&a.to_text(), "b.ini").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(a.solver.kappas.len(), 4);
    assert_eq!(a.solver.n_at(3), 256);
    assert_eq!(a.solver.single(2).n, vec![128]);
    assert_eq!(a.diagnostics.window, FitWindow::Explicit { start: 2.5, end: 9.0 });
    assert_eq!(a.sweep, SweepMode::Synthetic { beta: 1.5, prefactor: 0.3 });
    let base = ExperimentConfig::parse(BASE, "base.ini").unwrap();
    assert_eq!(ExperimentConfig::parse(&base.to_text(), "x").unwrap(), base);
}

#[test]
fn errors_name_the_offending_line() {
    let bad_value = BASE.replace("dt = 0.001", "dt = fast");
    assert_eq!(line_of(ExperimentConfig::parse(&bad_value, "c.ini").unwrap_err()), 8);

    let unknown_key = format!("{BASE}colour = red\n");
    assert_eq!(line_of(ExperimentConfig::parse(&unknown_key, "c.ini").unwrap_err()), 11);

    let repeated = format!("{BASE}n = 64\n");
    assert_eq!(line_of(ExperimentConfig::parse(&repeated, "c.ini").unwrap_err()), 11);

    let section = format!("{BASE}[plots]\n");
    assert_eq!(line_of(ExperimentConfig::parse(&section, "c.ini").unwrap_err()), 11);

    let orphan = "n = 4\n[flow]\nkind = cellular\n";
    assert_eq!(line_of(ExperimentConfig::parse(orphan, "c.ini").unwrap_err()), 1);

    let not_pow2 = BASE.replace("n = 32", "n = 48");
    assert_eq!(line_of(ExperimentConfig::parse(&not_pow2, "c.ini").unwrap_err()), 7);

    let flow = BASE.replace("kind = steady-shear", "kind = vortex");
    assert_eq!(line_of(ExperimentConfig::parse(&flow, "c.ini").unwrap_err()), 3);

    let message = ExperimentConfig::parse(&bad_value, "c.ini").unwrap_err().to_string();
    assert!(message.contains("c.ini:8"), "{message}");
}

#[test]
fn grid_list_must_match_the_kappa_list() {
    let bad = BASE.replace("n = 32", "n = 32, 64");
    assert_eq!(line_of(ExperimentConfig::parse(&bad, "c.ini").unwrap_err()), 7);
    let ok = bad.replace("kappa = 0.01", "kappa = 0.01, 0.001");
    assert_eq!(ExperimentConfig::parse(&ok, "c.ini").unwrap().solver.n_at(1), 64);
}

#[test]
fn missing_required_keys_are_reported() {
    let no_dt = BASE.replace("dt = 0.001\n", "");
    let err = ExperimentConfig::parse(&no_dt, "c.ini").unwrap_err();
    assert!(err.to_string().contains("dt"), "{err}");
    assert!(matches!(ExperimentConfig::parse("[solver]\nn = 8\n", "c.ini"), Err(CliError::Config(_))));
}

#[test]
fn overrides_replace_or_add_values() {
    let mut doc = Document::parse(BASE, "c.ini").unwrap();
    doc.apply_override("solver.kappa=0.5, 0.25").unwrap();
    doc.apply_override("output.directory = out").unwrap();
    let c = ExperimentConfig::from_document(&doc).unwrap();
    assert_eq!(c.solver.kappas, vec![0.5, 0.25]);
    assert_eq!(c.solver.n_at(1), 32);
    assert_eq!(c.output.directory.as_deref(), Some("out"));

    assert!(doc.apply_override("kappa=1").is_err());
    assert!(doc.apply_override("plots.x=1").is_err());
    doc.apply_override("solver.dt=-1").unwrap();
    let err = ExperimentConfig::from_document(&doc).unwrap_err();
    assert!(matches!(err, CliError::Config(ref m) if m.contains("override solver.dt")), "{err}");
}

#[test]
fn seed_reaches_flow_and_initial_data() {
    let text = "[flow]\nkind = alternating-sine\nseed = 1\nswitching_period = 0.5\namplitude = 1\n\
                [initial]\nkind = random-modes\nseed = 1\n[solver]\nn = 16\ndt = 0.01\nkappa = 0\nhorizon = 1\n";
    let mut c = ExperimentConfig::parse(text, "s.ini").unwrap();
    c.set_seed(99);
    assert_eq!(c.seed(), Some(99));
    assert!(matches!(c.initial, InitialCondition::RandomModes { seed: 99, .. }));
    let again = ExperimentConfig::parse(&c.to_text(), "s.ini").unwrap();
    assert_eq!(again, c);
}
