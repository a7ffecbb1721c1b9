//! One-dimensional adaptive Simpson quadrature.

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integrates over consecutive pieces `[points[i], points[i+1]]`.
pub fn integrate_pieces(f: &impl Fn(f64) -> f64, points: &[f64], tol: f64) -> f64 {
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    points
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / pieces))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Require a few levels so that smooth-looking coarse samples of an
    // oscillatory integrand are not accepted.
    if depth == 0 || (depth < 46 && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_trig() {
        let v = integrate(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-12);
        let v = integrate(&|x: f64| (2.0 * PI * x).cos().abs(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / PI).abs() < 1e-10);
        let v = integrate_pieces(&|x: f64| (2.0 * PI * x).sin().powi(2), &[0.0, 0.5, 1.0], 1e-12);
        assert!((v - 0.5).abs() < 1e-12);
    }
}
