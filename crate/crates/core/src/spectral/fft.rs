//! Two-dimensional FFTs on the N×N periodic grid.
//!
//! Arrays are row-major with the row index running over `y` (physical) or
//! `ky` (spectral). Forward transforms are normalised by `1/N²` so that the
//! stored coefficients are the Fourier coefficients of the periodic
//! function; inverse transforms are unnormalised sums.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Signed wavenumber of FFT index `idx` on an `n`-point axis.
///
/// The Nyquist index `n/2` maps to `-n/2`.
#[inline]
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// FFT index of signed wavenumber `k` (taken modulo `n`).
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

pub fn check_resolution(n: usize) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::config(format!(
            "grid resolution must be a power of two >= 4, got {n}"
        )));
    }
    Ok(())
}

/// Planned forward/inverse transforms for one grid size.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Result<Self> {
        check_resolution(n)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            n,
            forward,
            inverse,
            scratch_len,
        })
    }

    /// Shared plan for resolution `n`.
    pub fn cached(n: usize) -> Result<Arc<Fft2>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("fft plan cache poisoned");
        if let Some(plan) = guard.get(&n) {
            return Ok(Arc::clone(plan));
        }
        let plan = Arc::new(Fft2::new(n)?);
        guard.insert(n, Arc::clone(&plan));
        Ok(plan)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.scratch_len]
    }

    /// Unnormalised forward transform of every contiguous length-`n` row.
    pub fn forward_rows(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        for row in data.chunks_exact_mut(self.n) {
            self.forward.process_with_scratch(row, scratch);
        }
    }

    /// Unnormalised inverse transform of every contiguous length-`n` row.
    pub fn inverse_rows(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        for row in data.chunks_exact_mut(self.n) {
            self.inverse.process_with_scratch(row, scratch);
        }
    }

    /// Forward transform of a single length-`n` buffer.
    pub fn forward_1d(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    /// Inverse transform of a single length-`n` buffer.
    pub fn inverse_1d(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    /// Normalised 2-D forward transform (physical → Fourier coefficients).
    pub fn forward(&self, data: &mut [Complex64]) {
        let mut scratch = self.scratch();
        let mut work = vec![Complex64::new(0.0, 0.0); data.len()];
        self.forward_rows(data, &mut scratch);
        transpose(self.n, data, &mut work);
        self.forward_rows(&mut work, &mut scratch);
        transpose(self.n, &work, data);
        let norm = 1.0 / (self.n * self.n) as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
    }

    /// 2-D inverse transform (Fourier coefficients → physical samples).
    pub fn inverse(&self, data: &mut [Complex64]) {
        let mut scratch = self.scratch();
        let mut work = vec![Complex64::new(0.0, 0.0); data.len()];
        self.inverse_rows(data, &mut scratch);
        transpose(self.n, data, &mut work);
        self.inverse_rows(&mut work, &mut scratch);
        transpose(self.n, &work, data);
    }
}

/// Square transpose `dst[c*n + r] = src[r*n + c]`, blocked for cache reuse.
pub fn transpose<T: Copy>(n: usize, src: &[T], dst: &mut [T]) {
    const BLOCK: usize = 32;
    debug_assert_eq!(src.len(), n * n);
    debug_assert_eq!(dst.len(), n * n);
    for rb in (0..n).step_by(BLOCK) {
        for cb in (0..n).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(n) {
                for c in cb..(cb + BLOCK).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_round_trip() {
        let n = 16;
        for idx in 0..n {
            assert_eq!(index_of(wavenumber(idx, n), n), idx);
        }
        assert_eq!(wavenumber(8, 16), -8);
        assert_eq!(wavenumber(7, 16), 7);
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(Fft2::new(24).is_err());
        assert!(Fft2::new(2).is_err());
        assert!(Fft2::new(32).is_ok());
    }

    #[test]
    fn transpose_is_involution() {
        let n = 40;
        let src: Vec<usize> = (0..n * n).collect();
        let mut a = vec![0; n * n];
        let mut b = vec![0; n * n];
        transpose(n, &src, &mut a);
        assert_eq!(a[3 * n + 5], src[5 * n + 3]);
        transpose(n, &a, &mut b);
        assert_eq!(src, b);
    }
}
