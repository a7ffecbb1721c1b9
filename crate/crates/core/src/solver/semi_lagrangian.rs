//! Semi-Lagrangian transport with periodic bicubic interpolation.

use crate::flow::{InstantVelocity, VelocityProtocol};

/// Cubic Lagrange weights for nodes `-1, 0, 1, 2` at offset `s ∈ [0, 1)`.
fn weights(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

/// Periodic bicubic interpolation of grid samples at `(x, y)`.
pub fn interpolate(values: &[f64], n: usize, x: f64, y: f64) -> f64 {
    let gx = x * n as f64;
    let gy = y * n as f64;
    let (fx, fy) = (gx.floor(), gy.floor());
    let wx = weights(gx - fx);
    let wy = weights(gy - fy);
    let ni = n as i64;
    let (i0, j0) = (fx as i64, fy as i64);
    let mut acc = 0.0;
    for (b, wyb) in wy.iter().enumerate() {
        if *wyb == 0.0 {
            continue;
        }
        let j = (j0 + b as i64 - 1).rem_euclid(ni) as usize;
        let row = &values[j * n..(j + 1) * n];
        let mut r = 0.0;
        for (a, wxa) in wx.iter().enumerate() {
            let i = (i0 + a as i64 - 1).rem_euclid(ni) as usize;
            r += wxa * row[i];
        }
        acc += wyb * r;
    }
    acc
}

/// One step from `t` to `t + dt`: RK4 backtrace of every grid point, then
/// interpolation at the departure points and removal of the mean.
pub fn step(values: &[f64], n: usize, protocol: &VelocityProtocol, t: f64, dt: f64) -> Vec<f64> {
    let frozen = protocol.at_time(t + 0.5 * dt);
    let at = |a: f64| InstantVelocity { shape: frozen.shape.clone(), amplitude: a };
    let (u1, u2, u3) = (at(protocol.amplitude(t + dt)), at(protocol.amplitude(t + 0.5 * dt)), at(protocol.amplitude(t)));
    let h = 1.0 / n as f64;
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        let y = j as f64 * h;
        for i in 0..n {
            let x = i as f64 * h;
            let k1 = u1.velocity(x, y);
            let k2 = u2.velocity(x - 0.5 * dt * k1[0], y - 0.5 * dt * k1[1]);
            let k3 = u2.velocity(x - 0.5 * dt * k2[0], y - 0.5 * dt * k2[1]);
            let k4 = u3.velocity(x - dt * k3[0], y - dt * k3[1]);
            let dx = x - dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            let dy = y - dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            out[j * n + i] = interpolate(values, n, dx, dy);
        }
    }
    let mean = out.iter().sum::<f64>() / (n * n) as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_cubics() {
        for &s in &[0.0, 0.25, 0.5, 0.9] {
            let w = weights(s);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let cubic = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x - 3.0;
            let v: f64 = (0..4).map(|a| w[a] * cubic(a as f64 - 1.0)).sum();
            assert!((v - cubic(s)).abs() < 1e-12);
        }
        assert_eq!(weights(0.0), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn interpolation_hits_grid_values() {
        let n = 8;
        let values: Vec<f64> = (0..n * n).map(|k| k as f64).collect();
        for j in 0..n {
            for i in 0..n {
                let v = interpolate(&values, n, i as f64 / n as f64, j as f64 / n as f64);
                assert_eq!(v, values[j * n + i]);
            }
        }
        // Periodic wrap.
        assert_eq!(interpolate(&values, n, 1.0, 0.0), values[0]);
    }
}
