use num_complex::Complex64;

use super::fft::{index_of, Fft2};
use crate::Result;

/// Relative tolerance on `|θ̂₀| / ‖θ‖_{L²}` below which a field counts as
/// mean-zero.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

/// Real scalar field sampled on the uniform `n×n` grid of `[0,1)²`.
///
/// Both the physical samples and the Fourier coefficients are kept; they are
/// computed from one another at construction and never mutated afterwards.
/// `values[j*n + i]` is the sample at `(x, y) = (i/n, j/n)` and
/// `spectral[ky*n + kx]` (FFT index order) is the coefficient
/// `θ̂_k = n⁻² Σ_x θ(x) e^{-2πi k·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    n: usize,
    values: Vec<f64>,
    spectral: Vec<Complex64>,
    mean: f64,
}

impl ScalarField {
    /// Builds a field from physical samples (forward transform).
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        let fft = Fft2::cached(n)?;
        if values.len() != n * n {
            return Err(crate::Error::config(format!(
                "expected {} samples for n = {n}, got {}",
                n * n,
                values.len()
            )));
        }
        let mut spectral: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut spectral);
        let mean = spectral[0].re;
        Ok(Self {
            n,
            values,
            spectral,
            mean,
        })
    }

    /// Builds a field from Fourier coefficients (inverse transform).
    ///
    /// The imaginary part of the inverse transform is discarded, which
    /// projects non-Hermitian input onto its real part.
    pub fn from_spectral(n: usize, spectral: Vec<Complex64>) -> Result<Self> {
        let fft = Fft2::cached(n)?;
        if spectral.len() != n * n {
            return Err(crate::Error::config(format!(
                "expected {} coefficients for n = {n}, got {}",
                n * n,
                spectral.len()
            )));
        }
        let mut work = spectral;
        fft.inverse(&mut work);
        let values: Vec<f64> = work.iter().map(|c| c.re).collect();
        // Re-derive the coefficients so that both views describe the same
        // real field exactly.
        Self::from_values(n, values)
    }

    /// Samples `f(x, y)` at the grid points.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        super::fft::check_resolution(n)?;
        let h = 1.0 / n as f64;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(i as f64 * h, j as f64 * h));
            }
        }
        Self::from_values(n, values)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_values(n, vec![0.0; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `1/n`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectral(&self) -> &[Complex64] {
        &self.spectral
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample at grid point `(i, j)`, indices taken periodically.
    pub fn at(&self, i: i64, j: i64) -> f64 {
        let n = self.n as i64;
        self.values[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize]
    }

    /// Coefficient of the signed wavevector `(kx, ky)`.
    pub fn coefficient(&self, kx: i64, ky: i64) -> Complex64 {
        self.spectral[index_of(ky, self.n) * self.n + index_of(kx, self.n)]
    }

    /// `‖θ‖_{L²}` via Parseval (includes the mean).
    pub fn l2_norm(&self) -> f64 {
        self.spectral.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean.abs() <= MEAN_ZERO_TOL * self.l2_norm().max(f64::MIN_POSITIVE)
    }

    /// `c·θ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| c * v).collect(),
            spectral: self.spectral.iter().map(|z| z * c).collect(),
            mean: c * self.mean,
        }
    }

    /// `self − other`; both fields must share the grid.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(crate::Error::config(format!(
                "grid mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(Self {
            n: self.n,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            spectral: self.spectral.iter().zip(&other.spectral).map(|(a, b)| a - b).collect(),
            mean: self.mean - other.mean,
        })
    }
}

/// Subtracts the spatial mean. Idempotent.
pub fn project_mean_zero(field: &ScalarField) -> ScalarField {
    let mean = field.mean;
    let mut spectral = field.spectral.clone();
    spectral[0] = Complex64::new(0.0, 0.0);
    ScalarField {
        n: field.n,
        values: field.values.iter().map(|v| v - mean).collect(),
        spectral,
        mean: 0.0,
    }
}
