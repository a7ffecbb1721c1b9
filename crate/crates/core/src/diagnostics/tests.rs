use std::f64::consts::PI;

use super::*;
use crate::flow::VelocityProtocol;
use crate::solver::{solve, SolverConfig};

fn sine_k(n: usize, k: f64) -> ScalarField {
    ScalarField::from_fn(n, |x, _| (2.0 * PI * k * x).sin()).unwrap()
}

fn heat(horizon: f64) -> SimulationSeries {
    let cfg = SolverConfig::new(32, 1e-3, 0.01);
    solve(&sine_k(32, 1.0), &VelocityProtocol::zero(), &cfg, horizon).unwrap()
}

fn synthetic(f: impl Fn(f64) -> f64, count: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..count).map(|k| k as f64 * dt).collect();
    let v = t.iter().map(|&s| f(s)).collect();
    (t, v)
}

#[test]
fn exact_exponential_recovered() {
    let (t, v) = synthetic(|s| 3.0 * (-2.0 * s).exp(), 50, 0.05);
    let fit = fit_exponential(&t, &v, FitWindow::Full, "l2").unwrap();
    assert!((fit.rate - 2.0).abs() < 1e-10);
    assert!((fit.prefactor - 3.0).abs() < 1e-10 * 3.0);
    assert!((fit.r_squared - 1.0).abs() < 1e-10);
    let late = fit_exponential(&t, &v, FitWindow::default(), "l2").unwrap();
    assert!((late.rate - 2.0).abs() < 1e-10);
    assert!(late.window[1] == t[49] && late.window[0] < late.window[1]);
    let json: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
    assert_eq!(json.as_object().unwrap().len(), 4);
    assert_eq!(json["window"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_errors() {
    let (t, v) = synthetic(|s| (-s).exp(), 5, 0.1);
    assert!(matches!(fit_exponential(&t, &v, FitWindow::Full, "l2"), Err(Error::Domain(_))));
    let (t, mut v) = synthetic(|s| (-s).exp(), 30, 0.1);
    v[10] = 0.0;
    assert!(fit_exponential(&t, &v, FitWindow::Full, "l2").is_err());
    v[10] = -1.0;
    assert!(fit_exponential(&t, &v, FitWindow::Explicit { start: 0.5, end: 2.0 }, "l2").is_err());
    let flat = vec![1.0; 30];
    assert!(fit_exponential(&t, &flat, FitWindow::default(), "l2").is_err());
}

#[test]
fn heat_rate_and_crossover() {
    let s = heat(2.5);
    let fit = fit_exponential_rate(&s, "l2", FitWindow::Full).unwrap();
    assert!((fit.rate - 4.0 * PI * PI * 0.01).abs() < 1e-6);
    assert!((fit.rate - 0.394784).abs() < 1e-6);
    let t = crossover_time(&s);
    let expected = 4f64.ln() / (8.0 * PI * PI * 0.01);
    assert!((expected - 1.755762).abs() < 1e-6);
    assert!((t - expected).abs() < 1e-6, "{t}");
    assert_eq!(crossover_time(&heat(0.5)), f64::INFINITY);
}

#[test]
fn theoretical_times() {
    assert!((theoretical_t(1e-4, f64::INFINITY) - 9.21034).abs() < 1e-5);
    assert!((theoretical_t(1e-3, 1.0) - 1e3).abs() < 1e-9);
    assert!((theoretical_t(1e-2, 2.0) - (100f64).ln().powi(2)).abs() < 1e-12);
    assert!(theoretical_t(2.0, 2.0).is_nan());
}

#[test]
fn batchelor_single_modes() {
    let mut cfg = SolverConfig::new(32, 1e-3, 0.0);
    cfg.resolution_guard = false;
    for k in [1.0, 2.0, 3.0] {
        let s = solve(&sine_k(32, k), &VelocityProtocol::zero(), &cfg, 0.0).unwrap();
        let l = batchelor_scale(&s).unwrap();
        assert!((l[0].1 - 1.0 / (2.0 * PI * k)).abs() < 1e-14);
    }
    let zero = solve(&ScalarField::zeros(32).unwrap(), &VelocityProtocol::zero(), &cfg, 0.0).unwrap();
    assert!(batchelor_scale(&zero).is_err());
    let p = batchelor_plateau(&heat(1.0), 0.01, f64::INFINITY).unwrap();
    assert!((p.plateau - 1.0 / (2.0 * PI)).abs() < 1e-12);
    assert!((p.predicted - (0.01 * 100f64.ln()).sqrt()).abs() < 1e-14);
}

#[test]
fn heat_dissipation_fraction() {
    let s = heat(1.0);
    let f = dissipation_fraction(&s).unwrap();
    let expected = 0.5 * (1.0 - (-8.0 * PI * PI * 0.01f64).exp());
    assert!((expected - 0.272980).abs() < 1e-6);
    assert!((f.direct.last().unwrap() - expected).abs() < 1e-6);
    assert!((f.identity.last().unwrap() - expected).abs() < 1e-6);
    assert!(f.max_discrepancy() < 1e-8);

    let cfg = SolverConfig::new(32, 1e-2, 0.01);
    let long = solve(&sine_k(32, 1.0), &VelocityProtocol::zero(), &cfg, 40.0).unwrap();
    let f = dissipation_fraction(&long).unwrap();
    assert!((f.direct.last().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn smooth_flow_dissipation_decreases_with_kappa() {
    let flow = VelocityProtocol::cellular(1.0).unwrap();
    let theta0 = sine_k(128, 1.0);
    let fractions: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&k| {
            let s = solve(&theta0, &flow, &SolverConfig::new(128, 2e-3, k), 1.0).unwrap();
            *dissipation_fraction(&s).unwrap().direct.last().unwrap()
        })
        .collect();
    assert!(fractions.windows(2).all(|w| w[1] < w[0]), "{fractions:?}");
}

#[test]
fn heat_enhancement_report() {
    let s = heat(10.0);
    let r = enhancement_report(&s, 0.01).unwrap();
    let d = 4.0 * PI * PI * 0.01;
    assert!((r.rate - d).abs() < 1e-6);
    assert!((r.lambda - 1.0).abs() < 1e-6);
    assert_eq!(r.delta_star, 0.25);
    let t0 = r.t0.unwrap();
    assert!((t0 - 2f64.ln() / (2.0 * d)).abs() < 1e-4);
    assert!(r.forward_holds && r.halving_holds);
    assert!(r.halving_checked >= 10);
}

#[test]
fn transport_has_no_enhancement_time() {
    let cfg = SolverConfig::new(32, 1e-3, 0.0);
    let s = solve(&sine_k(32, 1.0), &VelocityProtocol::zero(), &cfg, 1.0).unwrap();
    let r = enhancement_report(&s, 0.0).unwrap();
    assert!(r.t0.is_none());
    assert!(!r.forward_holds && !r.halving_holds);
    assert_eq!(r.rate, 0.0);
}

#[test]
fn mixing_rate_cases() {
    let zero = VelocityProtocol::zero();
    let cfg = SolverConfig::new(32, 1e-3, 0.0);
    let s = solve(&sine_k(32, 1.0), &zero, &cfg, 0.5).unwrap();
    let g = mixing_rate_vs_budget(&s, &zero.gradient_norm(f64::INFINITY).unwrap()).unwrap();
    assert!(g.iter().all(|&(_, v)| v == 0.0));

    // a steady shear only mixes algebraically, so the rate per unit budget decays
    let shear = VelocityProtocol::steady_shear(1.0 / (2.0 * PI)).unwrap();
    let mut cfg = SolverConfig::new(128, 5e-3, 0.0);
    cfg.diagnostic_cadence = 20;
    let s = solve(&sine_k(128, 1.0), &shear, &cfg, 20.0).unwrap();
    let g = mixing_rate_vs_budget(&s, &shear.gradient_norm(f64::INFINITY).unwrap()).unwrap();
    let max = g.iter().map(|p| p.1).fold(0.0, f64::max);
    let last = g.last().unwrap().1;
    assert!(last > 0.0 && last < 0.5 * max, "{last} {max}");
}

#[test]
fn scaling_fit_synthetic() {
    let kappas = [1e-2f64, 1e-3, 1e-4, 1e-5];
    let pts: Vec<(f64, f64)> = kappas.iter().map(|&k| (k, 1.0 / (1.0 / k).ln())).collect();
    let fit = scaling_fit(&pts, f64::INFINITY).unwrap();
    assert!((fit.beta - 1.0).abs() < 1e-6);
    assert!(fit.points.iter().all(|p| (p.c - 1.0).abs() < 1e-12));
    assert!((fit.c_spread() - 1.0).abs() < 1e-12);

    let pts2: Vec<(f64, f64)> = kappas.iter().map(|&k| (k, (1.0 / k).ln().powi(-2))).collect();
    let fit2 = scaling_fit(&pts2, 2.0).unwrap();
    assert!((fit2.beta - 2.0).abs() < 1e-6);
    assert!(fit2.points.iter().all(|p| (p.c - 1.0).abs() < 1e-12));

    let mut shuffled = pts.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    assert_eq!(scaling_fit(&shuffled, f64::INFINITY).unwrap(), fit);

    let json: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
    assert!(json["beta"].is_number() && json["beta_stderr"].is_number());
    assert!(json["points"][0]["D"].is_number() && json["points"][0]["kappa"].is_number());
}

#[test]
fn scaling_fit_validation() {
    let pts = [(1e-2, 0.2), (1e-3, 0.1), (1e-4, 0.05)];
    assert!(scaling_fit(&pts, f64::INFINITY).is_err());
    let narrow = [(1e-2, 0.2), (5e-3, 0.1), (2e-3, 0.05), (1e-3 * 1.5, 0.04)];
    assert!(scaling_fit(&narrow, f64::INFINITY).is_err());
    let dup = [(1e-2, 0.2), (1e-2, 0.1), (1e-3, 0.05), (1e-4, 0.04)];
    assert!(scaling_fit(&dup, f64::INFINITY).is_err());
    let ok = [(1e-2, 0.2), (1e-3, 0.1), (1e-4, 0.05), (1e-5, 0.04)];
    assert!(scaling_fit(&ok, 1.0).is_err());
}

#[test]
fn transport_diffusive_gap_heat() {
    let kappa = 1e-3;
    let mut cfg = SolverConfig::new(32, 1e-3, kappa);
    cfg.resolution_guard = false;
    let gap = compare_transport_diffusive(&sine_k(32, 1.0), &VelocityProtocol::zero(), &cfg, 1.0, 0.5).unwrap();
    for &(t, g) in &gap.samples {
        let expected = (1.0 - (-4.0 * PI * PI * kappa * t).exp()).powi(2) * 0.5 / (4.0 * PI * PI);
        assert!((g * g - expected).abs() < 1e-4 * expected.max(1e-12), "{t}");
    }
    assert!((gap.at(1.0) - gap.samples.last().unwrap().1).abs() == 0.0);
    let scaled = gap.scaled();
    assert!((scaled[5].1 - gap.samples[5].1.powi(2) / kappa.sqrt()).abs() < 1e-15);

    let mut cfg0 = cfg.clone();
    cfg0.kappa = 0.0;
    let flow = VelocityProtocol::cellular(0.1).unwrap();
    let zero = compare_transport_diffusive(&sine_k(32, 1.0), &flow, &cfg0, 0.5, 0.5).unwrap();
    assert!(zero.samples.iter().all(|p| p.1 == 0.0));
    assert!(compare_transport_diffusive(&sine_k(32, 1.0), &flow, &cfg0, 0.5, 1.0).is_err());
}

#[test]
fn restart_time_takes_the_slowest_start() {
    let g = |t: f64| if t < 1.0 { -2.0 * t } else { -2.0 - 0.2 * (t - 1.0) };
    let (t, v) = synthetic(g, 401, 0.05);
    let slow = 2f64.ln() / 0.2;
    assert!((restart_time(&t, &v).unwrap() - slow).abs() < 1e-9);
    // Iterating the halving time measured from t = 0 breaks down once the
    // decay slows.
    let fast = 2f64.ln() / 2.0;
    assert!(interpolate(&t, &v, 3.0 * fast) > 3.0 * -(2f64.ln()));
}
