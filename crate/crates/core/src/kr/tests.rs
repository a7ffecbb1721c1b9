use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::spectral::ScalarField;

fn two_cells() -> DiscreteMeasurePair {
    DiscreteMeasurePair::new(vec![([0.1, 0.1], 0.5)], vec![([0.35, 0.1], 0.5)]).unwrap()
}

/// Minimum cost over every vertex of the transportation polytope, found by
/// solving each candidate basis directly.
fn lp_oracle(pair: &DiscreteMeasurePair, delta: f64) -> f64 {
    let (np, nm) = (pair.plus.len(), pair.minus.len());
    let rows = np + nm - 1;
    let vars = np * nm;
    let mut a = DMatrix::<f64>::zeros(rows, vars);
    let mut rhs = DVector::<f64>::zeros(rows);
    for i in 0..np {
        for j in 0..nm {
            a[(i, i * nm + j)] = 1.0;
            if j + 1 < nm {
                a[(np + j, i * nm + j)] = 1.0;
            }
        }
        rhs[i] = pair.plus[i].1;
    }
    for j in 0..nm - 1 {
        rhs[np + j] = pair.minus[j].1;
    }
    let cost: Vec<f64> = pair
        .plus
        .iter()
        .flat_map(|(x, _)| pair.minus.iter().map(move |(y, _)| (torus_distance(*x, *y) / delta).ln_1p()))
        .collect();
    let mut best = f64::INFINITY;
    for basis in (0..vars).combinations(rows) {
        let sub = DMatrix::from_fn(rows, rows, |r, c| a[(r, basis[c])]);
        let lu = sub.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = lu.solve(&rhs) else { continue };
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let c: f64 = basis.iter().zip(x.iter()).map(|(&k, &v)| cost[k] * v).sum();
        best = best.min(c);
    }
    best
}

fn random_lattice_pair(rng: &mut ChaCha8Rng, side: usize) -> DiscreteMeasurePair {
    let vals: Vec<f64> = (0..side * side).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (k, v) in vals.iter().enumerate() {
        let x = [(k % side) as f64 / side as f64, (k / side) as f64 / side as f64];
        let m = (v - mean) / (side * side) as f64;
        if m > 0.0 {
            plus.push((x, m));
        } else if m < 0.0 {
            minus.push((x, -m));
        }
    }
    DiscreteMeasurePair::new(plus, minus).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    let vals: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    crate::spectral::project_mean_zero(&ScalarField::from_values(n, vals).unwrap())
}

#[test]
fn torus_distance_wraps() {
    assert_eq!(torus_distance([0.1, 0.2], [0.1, 0.2]), 0.0);
    assert!((torus_distance([0.05, 0.0], [0.95, 0.0]) - 0.1).abs() < 1e-15);
    assert!((torus_distance([0.0, 0.0], [0.5, 0.5]) - TORUS_DIAMETER).abs() < 1e-15);
    assert!((torus_distance([0.9, 0.9], [0.1, 0.1]) - 0.2f64.hypot(0.2)).abs() < 1e-15);
}

#[test]
fn discretize_sine_halves() {
    let f = ScalarField::from_fn(64, |x, _| (2.0 * std::f64::consts::PI * x).sin()).unwrap();
    let pair = discretize(&f, DEFAULT_MASS_FLOOR).unwrap();
    assert!(pair.plus.iter().all(|(x, _)| x[0] > 0.0 && x[0] < 0.5));
    assert!(pair.minus.iter().all(|(x, _)| x[0] > 0.5));
    let mp: f64 = pair.plus.iter().map(|p| p.1).sum();
    let mm: f64 = pair.minus.iter().map(|p| p.1).sum();
    assert!((mp - 1.0 / std::f64::consts::PI).abs() < 1e-3);
    assert!((mp - mm).abs() <= 1e-10 * mp);
}

#[test]
fn discretize_zero_and_offsets() {
    let pair = discretize(&ScalarField::zeros(8).unwrap(), DEFAULT_MASS_FLOOR).unwrap();
    assert!(pair.plus.is_empty() && pair.minus.is_empty() && pair.is_empty());
    let shifted = ScalarField::from_fn(8, |x, _| 1.0 + x).unwrap();
    assert!(matches!(discretize(&shifted, DEFAULT_MASS_FLOOR), Err(Error::Domain(_))));
}

#[test]
fn discretize_balances_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let pair = discretize(&random_field(&mut rng, 16), DEFAULT_MASS_FLOOR).unwrap();
        let mp: f64 = pair.plus.iter().map(|p| p.1).sum();
        let mm: f64 = pair.minus.iter().map(|p| p.1).sum();
        assert!((mp - mm).abs() <= 1e-10 * mp);
    }
}

#[test]
fn two_cell_exact_and_entropic() {
    let expected = 0.5 * 3.5f64.ln();
    assert!((expected - 0.626381).abs() < 1e-6);
    let exact = kr_distance_exact(&two_cells(), 0.1).unwrap();
    assert!((exact.value - expected).abs() < 1e-14);
    assert_eq!(exact.gap, 0.0);
    let plan = exact.plan.as_ref().unwrap();
    assert_eq!(plan.len(), 1);
    assert!((plan[0].mass - 0.5).abs() < 1e-15);
    let ent = kr_distance_entropic(&two_cells(), 0.1, EntropicOptions::default()).unwrap();
    assert!((ent.value - expected).abs() < 1e-3);
    assert!(ent.value - ent.gap <= expected + 1e-12);
}

#[test]
fn collocated_measures_cost_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<([f64; 2], f64)> =
        (0..12).map(|_| ([rng.gen::<f64>(), rng.gen::<f64>()], rng.gen_range(0.1..1.0))).collect();
    let pair = DiscreteMeasurePair::new(pts.clone(), pts).unwrap();
    assert!(kr_distance_exact(&pair, 0.05).unwrap().value.abs() < 1e-15);
}

#[test]
fn exact_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..25 {
        let pair = random_lattice_pair(&mut rng, 3);
        let delta = rng.gen_range(0.01..0.5);
        let exact = kr_distance_exact(&pair, delta).unwrap().value;
        let oracle = lp_oracle(&pair, delta);
        assert!((exact - oracle).abs() < 1e-9, "{exact} vs {oracle}");
    }
}

#[test]
fn exact_plan_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pair = discretize(&random_field(&mut rng, 16), DEFAULT_MASS_FLOOR).unwrap();
    let res = kr_distance_exact(&pair, 0.1).unwrap();
    let plan = res.plan.unwrap();
    for (x, m) in &pair.plus {
        let out: f64 = plan.iter().filter(|e| e.src == *x).map(|e| e.mass).sum();
        assert!((out - m).abs() < 1e-12 * pair.total_mass.max(1.0));
    }
    for (y, m) in &pair.minus {
        let inflow: f64 = plan.iter().filter(|e| e.dst == *y).map(|e| e.mass).sum();
        assert!((inflow - m).abs() < 1e-12 * pair.total_mass.max(1.0));
    }
    let cost: f64 = plan.iter().map(|e| e.mass * log_cost(torus_distance(e.src, e.dst), 0.1)).sum();
    assert!((cost - res.value).abs() < 1e-12);
}

#[test]
fn entropic_tracks_exact_on_small_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let pair = discretize(&random_field(&mut rng, 8), DEFAULT_MASS_FLOOR).unwrap();
        let exact = kr_distance_exact(&pair, 0.1).unwrap().value;
        let opts = EntropicOptions { epsilon: 1e-3, max_iterations: 10_000, ..Default::default() };
        let ent = kr_distance_entropic(&pair, 0.1, opts).unwrap();
        assert!(ent.iterations.unwrap() <= 10_000);
        assert!((ent.value - exact).abs() <= 1e-3, "{} vs {exact}", ent.value);
        assert!(ent.value >= exact - 1e-12);
        assert!(ent.value - ent.gap <= exact + 1e-12);
    }
}

#[test]
fn entropic_gap_shrinks_with_epsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pair = discretize(&random_field(&mut rng, 8), DEFAULT_MASS_FLOOR).unwrap();
    let gaps: Vec<f64> = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
        .iter()
        .map(|&e| {
            let opts = EntropicOptions { epsilon: e, ..Default::default() };
            kr_distance_entropic(&pair, 0.1, opts).unwrap().gap
        })
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0], "{gaps:?}");
    }
}

#[test]
fn entropic_flags_non_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pair = discretize(&random_field(&mut rng, 8), DEFAULT_MASS_FLOOR).unwrap();
    let opts = EntropicOptions { epsilon: 1e-4, max_iterations: 3, marginal_tol: 1e-12 };
    let res = kr_distance_entropic(&pair, 0.1, opts).unwrap();
    assert!(!res.converged);
    assert!(res.gap > 0.0);
}

#[test]
fn upper_bound_cases() {
    let ub = kr_upper_bound(&two_cells(), 0.1);
    assert!((ub - 0.5 * (2f64.sqrt() / 0.2 + 1.0).ln()).abs() < 1e-15);
    assert!((ub - 1.044143).abs() < 1e-6);
    let empty = discretize(&ScalarField::zeros(4).unwrap(), DEFAULT_MASS_FLOOR).unwrap();
    assert_eq!(kr_upper_bound(&empty, 0.1), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let pair = discretize(&random_field(&mut rng, 8), DEFAULT_MASS_FLOOR).unwrap();
        let delta = rng.gen_range(1e-3..1.0);
        assert!(kr_upper_bound(&pair, delta) >= kr_distance_exact(&pair, delta).unwrap().value);
    }
}

#[test]
fn lower_bound_formula() {
    let l1 = 2.0 / std::f64::consts::PI;
    let v = kr_lower_bound_from_norms(l1, 4.0, 1e-3, 1.0).unwrap();
    assert!((v - (l1 / 4e-3 + 1.0).ln() * l1).abs() < 1e-14);
    assert!((v - 3.231572).abs() < 1e-6);
    assert!(kr_lower_bound_from_norms(l1, 4.0, 1e12, 1.0).unwrap() < 1e-12);
    assert!(matches!(kr_lower_bound(&ScalarField::zeros(8).unwrap(), 0.1, 1.0), Err(Error::Domain(_))));
    let c = lower_bound_constant(l1, 4.0, 1e-3, 2.0);
    assert!((kr_lower_bound_from_norms(l1, 4.0, 1e-3, c).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn capacity_error_above_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pair = discretize(&random_field(&mut rng, 16), DEFAULT_MASS_FLOOR).unwrap();
    let err = kr_distance_exact_with_cap(&pair, 0.1, 100).unwrap_err();
    assert!(matches!(err, Error::Capacity { cap: 100, .. }));
    assert!(err.to_string().contains("entropic"));
    let big = discretize(&random_field(&mut rng, 128), DEFAULT_MASS_FLOOR).unwrap();
    assert!(matches!(kr_distance_exact(&big, 0.1), Err(Error::Capacity { cap: 4096, .. })));
    assert!(matches!(kr_distance_exact(&two_cells(), 0.0), Err(Error::Domain(_))));
}

#[test]
fn coarsening_error_bounds_the_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let fine = random_field(&mut rng, 16);
        for m in [4, 8] {
            let coarse = coarse_grain(&fine, m).unwrap();
            assert!((coarse.mean()).abs() < 1e-14);
            let d_f = kr_distance_exact(&discretize(&fine, 0.0).unwrap(), 0.05).unwrap().value;
            let d_c = kr_distance_exact(&discretize(&coarse, 0.0).unwrap(), 0.05).unwrap().value;
            let bound = coarsening_error(&fine, m, 0.05).unwrap();
            assert!((d_f - d_c).abs() <= bound + 1e-12, "{d_f} {d_c} {bound}");
        }
    }
    assert!(coarse_grain(&ScalarField::zeros(8).unwrap(), 3).is_err());
}

#[test]
fn result_exports() {
    let res = kr_distance_exact(&two_cells(), 0.1).unwrap();
    let json: serde_json::Value = serde_json::from_str(&res.to_json()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys.len(), 5);
    for k in ["value", "delta", "method", "gap", "iterations"] {
        assert!(keys.contains(&k));
    }
    assert_eq!(json["method"], "exact-flow");
    let mut out = Vec::new();
    res.write_plan_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_src,y_src,x_dst,y_dst,mass"));
    assert_eq!(lines.count(), 1);
}

fn points(len: usize) -> impl Strategy<Value = Vec<([f64; 2], f64)>> {
    prop::collection::vec(((0.0..1.0f64, 0.0..1.0f64), 0.05..1.0f64), 1..len)
        .prop_map(|v| v.into_iter().map(|((x, y), m)| ([x, y], m)).collect())
}

fn normalized(mut v: Vec<([f64; 2], f64)>) -> Vec<([f64; 2], f64)> {
    let s: f64 = v.iter().map(|p| p.1).sum();
    v.iter_mut().for_each(|p| p.1 /= s);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_nonincreasing_in_delta(a in points(10), b in points(10)) {
        let pair = DiscreteMeasurePair::new(normalized(a), normalized(b)).unwrap();
        let mut last = f64::INFINITY;
        for delta in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let d = kr_distance_exact(&pair, delta).unwrap().value;
            prop_assert!(d <= last + 1e-12);
            last = d;
        }
    }

    #[test]
    fn distance_symmetric(a in points(10), b in points(10), delta in 1e-3..1.0f64) {
        let pair = DiscreteMeasurePair::new(normalized(a), normalized(b)).unwrap();
        let d1 = kr_distance_exact(&pair, delta).unwrap().value;
        let d2 = kr_distance_exact(&pair.swapped(), delta).unwrap().value;
        prop_assert!((d1 - d2).abs() <= 1e-12 * d1.max(1.0));
    }

    #[test]
    fn distance_scale_equivariant(a in points(10), b in points(10), c in 0.01..100.0f64) {
        let pair = DiscreteMeasurePair::new(normalized(a), normalized(b)).unwrap();
        let d1 = kr_distance_exact(&pair, 0.1).unwrap().value;
        let d2 = kr_distance_exact(&pair.scaled(c), 0.1).unwrap().value;
        prop_assert!((d2 - c * d1).abs() <= 1e-10 * (c * d1).max(1e-12));
    }

    #[test]
    fn triangle_inequality(a in points(8), b in points(8), c in points(8), delta in 1e-3..1.0f64) {
        let (a, b, c) = (normalized(a), normalized(b), normalized(c));
        let d = |x: &Vec<([f64; 2], f64)>, y: &Vec<([f64; 2], f64)>| {
            kr_distance_exact(&DiscreteMeasurePair::new(x.clone(), y.clone()).unwrap(), delta).unwrap().value
        };
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }
}

mod rate_check {
    use super::super::*;
    use crate::flow::VelocityProtocol;
    use crate::solver::{solve, SolverConfig};
    use crate::spectral::ScalarField;

    fn sine(n: usize) -> ScalarField {
        ScalarField::from_fn(n, |x, _| (2.0 * std::f64::consts::PI * x).sin()).unwrap()
    }

    fn run(kappa: f64, dt: f64, every: usize, horizon: f64) -> crate::solver::SimulationSeries {
        let mut cfg = SolverConfig::new(32, dt, kappa);
        cfg.snapshot_cadence = Some(every);
        cfg.resolution_guard = false;
        cfg.scheme = crate::solver::Scheme::IntegratingFactorRk4;
        solve(&sine(32), &VelocityProtocol::zero(), &cfg, horizon).unwrap()
    }

    #[test]
    fn stationary_field_has_zero_ratio() {
        let s = run(0.0, 0.01, 10, 0.5);
        let opts = RateCheckOptions { coarse: Some(16), ..Default::default() };
        let r = kr_rate_check(&s, &VelocityProtocol::zero(), 0.0, 0.1, 2.0, opts).unwrap();
        assert_eq!(r.samples.len(), 4);
        assert!(r.samples.iter().all(|s| s.ratio == 0.0 && !s.inconclusive));
    }

    #[test]
    fn diffusion_ratio_stable_under_refinement() {
        let opts = RateCheckOptions { coarse: Some(16), ..Default::default() };
        let sup = |every: usize| {
            let s = run(0.05, 0.01, every, 1.0);
            let r = kr_rate_check(&s, &VelocityProtocol::zero(), 0.05, 0.1, 2.0, opts).unwrap();
            assert!(r.samples.iter().all(|s| s.ratio.is_finite() && s.ratio > 0.0));
            r.sup_ratio()
        };
        let (a, b) = (sup(10), sup(5));
        assert!((a / b - 1.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn rate_check_validation() {
        let s = run(0.0, 0.01, 10, 0.1);
        let zero = VelocityProtocol::zero();
        assert!(kr_rate_check(&s, &zero, 0.0, 0.1, 2.0, Default::default()).is_err());
        let s = run(0.0, 0.01, 10, 0.5);
        assert!(kr_rate_check(&s, &zero, 0.0, 0.0, 2.0, Default::default()).is_err());
        assert!(kr_rate_check(&s, &zero, 0.0, 0.1, 0.5, Default::default()).is_err());
    }
}
