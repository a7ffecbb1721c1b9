use std::f64::consts::PI;

use num_complex::Complex64;

use super::fft::wavenumber;
use super::field::{ScalarField, MEAN_ZERO_TOL};
use crate::{Error, Result};

/// Exponent `σ` of the homogeneous Sobolev norm `‖·‖_{Ḣ^σ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevOrder(f64);

impl SobolevOrder {
    /// The mix-norm `Ḣ⁻¹`.
    pub const H_MINUS_ONE: SobolevOrder = SobolevOrder(-1.0);
    pub const L2: SobolevOrder = SobolevOrder(0.0);
    /// The gradient seminorm `Ḣ¹`.
    pub const H_ONE: SobolevOrder = SobolevOrder(1.0);

    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::domain(format!("Sobolev order must be finite, got {sigma}")));
        }
        Ok(Self(sigma))
    }

    pub fn sigma(self) -> f64 {
        self.0
    }
}

/// `(Σ_k |2πk|^{2σ} |θ̂_k|²)^{1/2}` over the discrete Fourier lattice.
///
/// The `k = 0` term carries weight one for `σ = 0` (so the result is the full
/// `L²` norm), weight zero for `σ > 0`, and is required to vanish for `σ < 0`.
pub fn sobolev_norm(field: &ScalarField, order: SobolevOrder) -> Result<f64> {
    let sigma = order.sigma();
    let n = field.n();
    let spectral = field.spectral();
    let mut sum = 0.0;
    if sigma < 0.0 {
        let l2 = field.l2_norm();
        if spectral[0].norm() > MEAN_ZERO_TOL * l2.max(f64::MIN_POSITIVE) {
            return Err(Error::domain(format!(
                "negative Sobolev norm of a field with nonzero mean {:.3e}",
                field.mean()
            )));
        }
    } else if sigma == 0.0 {
        sum += spectral[0].norm_sqr();
    }
    for ky_idx in 0..n {
        let ky = wavenumber(ky_idx, n) as f64;
        let row = &spectral[ky_idx * n..(ky_idx + 1) * n];
        for (kx_idx, c) in row.iter().enumerate() {
            if kx_idx == 0 && ky_idx == 0 {
                continue;
            }
            let kx = wavenumber(kx_idx, n) as f64;
            let k2 = 4.0 * PI * PI * (kx * kx + ky * ky);
            let weight = if sigma == 0.0 { 1.0 } else { k2.powf(sigma) };
            sum += weight * c.norm_sqr();
        }
    }
    Ok(sum.sqrt())
}

/// Grid-quadrature `L^q` norm; `q = ∞` is the grid maximum of `|θ|`, a lower
/// bound on the continuum norm.
pub fn lebesgue_norm(field: &ScalarField, q: f64) -> Result<f64> {
    lebesgue_norm_of_values(field.values(), q)
}

pub(crate) fn lebesgue_norm_of_values(values: &[f64], q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::domain(format!("Lebesgue exponent must be >= 1, got {q}")));
    }
    if q.is_infinite() {
        return Ok(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let count = values.len() as f64;
    let mean = if q == 1.0 {
        values.iter().map(|v| v.abs()).sum::<f64>() / count
    } else if q == 2.0 {
        values.iter().map(|v| v * v).sum::<f64>() / count
    } else {
        values.iter().map(|v| v.abs().powf(q)).sum::<f64>() / count
    };
    Ok(mean.powf(1.0 / q))
}

/// Spectral gradient `(∂ₓθ, ∂ᵧθ)`.
///
/// The coefficients on the Nyquist row and column are zeroed so that both
/// components remain real.
pub fn gradient(field: &ScalarField) -> Result<[ScalarField; 2]> {
    let n = field.n();
    let (dx, dy) = gradient_coefficients(n, field.spectral());
    Ok([
        ScalarField::from_spectral(n, dx)?,
        ScalarField::from_spectral(n, dy)?,
    ])
}

/// Fourier coefficients of both gradient components, Nyquist modes zeroed.
pub fn gradient_coefficients(n: usize, spectral: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let zero = Complex64::new(0.0, 0.0);
    let mut dx = vec![zero; n * n];
    let mut dy = vec![zero; n * n];
    let nyq = n / 2;
    for ky_idx in 0..n {
        if ky_idx == nyq {
            continue;
        }
        let ky = wavenumber(ky_idx, n) as f64;
        for kx_idx in 0..n {
            if kx_idx == nyq {
                continue;
            }
            let kx = wavenumber(kx_idx, n) as f64;
            let c = spectral[ky_idx * n + kx_idx];
            let ic = Complex64::new(-c.im, c.re) * (2.0 * PI);
            dx[ky_idx * n + kx_idx] = ic * kx;
            dy[ky_idx * n + kx_idx] = ic * ky;
        }
    }
    (dx, dy)
}

/// `‖∇θ‖_{L²}` on the Fourier lattice, identical to `‖θ‖_{Ḣ¹}`.
pub fn gradient_l2_norm(field: &ScalarField) -> f64 {
    sobolev_norm(field, SobolevOrder::H_ONE).expect("positive order never fails")
}

/// `‖∇θ‖_{L¹} = ∫ |∇θ| dx` with the Euclidean length of the spectral gradient.
pub fn gradient_l1_norm(field: &ScalarField) -> Result<f64> {
    let [gx, gy] = gradient(field)?;
    let count = gx.values().len() as f64;
    Ok(gx
        .values()
        .iter()
        .zip(gy.values())
        .map(|(a, b)| a.hypot(*b))
        .sum::<f64>()
        / count)
}
