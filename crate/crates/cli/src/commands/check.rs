use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;
use smix_core::flow::{make_alternating_sine_flow, normalize_to_budget, VelocityProtocol};
use smix_core::initial::{random_modes, InitialCondition};
use smix_core::kr::{discretize, kr_distance_entropic, kr_distance_exact, DiscreteMeasurePair, EntropicOptions, DEFAULT_MASS_FLOOR};
use smix_core::solver::{energy_identity_residual, solve, SolverConfig};
use smix_core::spectral::{gradient_l2_norm, sobolev_norm, SobolevOrder};

use super::{create_dir, write_file};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub const CHECK_FILE: &str = "check.json";

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                format!("{tag} {:<28} measured {:.3e} (limit {:.1e})", r.name, r.measured, r.threshold)
            })
            .collect()
    }
}

fn at_most(name: &str, measured: f64, threshold: f64) -> CheckRow {
    CheckRow { name: name.into(), measured, threshold, passed: measured <= threshold }
}

/// Small, fast versions of the solver, norm and transport invariants. With a
/// config, its round trip is checked too.
pub fn cmd_check(config: Option<&ExperimentConfig>, out: Option<&Path>) -> CliResult<CheckReport> {
    let mut rows = Vec::new();

    let kappa = 0.01;
    let heat = solve(
        &InitialCondition::SineX.build(32)?,
        &VelocityProtocol::zero(),
        &SolverConfig::new(32, 1e-3, kappa),
        0.25,
    )?;
    let last = heat.records.last().expect("records");
    let exact = (-4.0 * PI * PI * kappa * 0.25).exp() / 2f64.sqrt();
    rows.push(at_most("heat_kernel_l2", (last.l2 - exact).abs() / exact, 1e-6));

    let shear = solve(
        &InitialCondition::TwoModes.build(128)?,
        &VelocityProtocol::steady_shear(1.0)?,
        &SolverConfig::new(128, 1e-3, 1e-3),
        0.25,
    )?;
    let residual = energy_identity_residual(&shear, 1e-3)?.iter().map(|r| r.1).fold(0.0, f64::max);
    rows.push(at_most("energy_identity", residual, 1e-4));

    let (flow, _) = normalize_to_budget(&make_alternating_sine_flow(1, 0.25, 1.0)?, f64::INFINITY, f64::INFINITY, 1.0)?;
    let transport = solve(&InitialCondition::SineX.build(64)?, &flow, &SolverConfig::new(64, 5e-3, 0.0), 0.5)?;
    let (a, b) = (transport.records[0], *transport.records.last().expect("records"));
    let drift = ((b.l2 - a.l2) / a.l2).abs().max(((b.lq - a.lq) / a.lq).abs());
    rows.push(at_most("transport_conservation", drift, 1e-3));

    let mut worst = f64::NEG_INFINITY;
    for seed in 0..100 {
        let f = random_modes(32, seed, 12)?;
        let l2 = f.l2_norm();
        let rhs = gradient_l2_norm(&f) * sobolev_norm(&f, SobolevOrder::H_MINUS_ONE)?;
        worst = worst.max((l2 * l2 - rhs) / (l2 * l2));
    }
    rows.push(at_most("interpolation_inequality", worst, 1e-10));

    let two_cells = DiscreteMeasurePair::new(vec![([0.0, 0.0], 0.5)], vec![([0.25, 0.0], 0.5)])?;
    let d = kr_distance_exact(&two_cells, 0.1)?.value;
    rows.push(at_most("kr_two_cell", (d - 0.5 * 3.5f64.ln()).abs(), 1e-12));

    let field = random_modes(8, 7, 3)?;
    let pair = discretize(&field, DEFAULT_MASS_FLOOR)?;
    let mut increase = f64::NEG_INFINITY;
    let mut prev = f64::INFINITY;
    for delta in [1e-3, 1e-2, 1e-1, 1.0] {
        let v = kr_distance_exact(&pair, delta)?.value;
        increase = increase.max(v - prev);
        prev = v;
    }
    rows.push(at_most("kr_delta_monotone", increase.max(0.0), 1e-12));
    let exact = kr_distance_exact(&pair, 0.1)?.value;
    let ent = kr_distance_entropic(&pair, 0.1, EntropicOptions::default())?.value;
    rows.push(at_most("kr_entropic_vs_exact", (ent - exact).abs(), 1e-3));

    if let Some(c) = config {
        let same = ExperimentConfig::parse(&c.to_text(), "round-trip").map(|r| r == *c).unwrap_or(false);
        rows.push(at_most("config_round_trip", if same { 0.0 } else { 1.0 }, 0.0));
    }

    let report = CheckReport { rows };
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join(CHECK_FILE), serde_json::to_string_pretty(&report).expect("json") + "\n")?;
    }
    Ok(report)
}

