//! Initial scalar configurations.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::{project_mean_zero, ScalarField};
use crate::Result;

/// Mean-zero initial data, all with `‖θ₀‖_{L²}` and `‖∇θ₀‖_{L²}` of order one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitialCondition {
    /// `sin(2πx)`.
    SineX,
    /// `sin(2πx) + sin(4πy)`.
    TwoModes,
    /// Sum of random low modes `|k|_∞ ≤ kmax` with amplitudes decaying like
    /// `|k|^{-2}` and uniformly random phases, rescaled to unit `L²` norm.
    RandomModes { seed: u64, kmax: u32 },
}

impl InitialCondition {
    pub fn build(&self, n: usize) -> Result<ScalarField> {
        match *self {
            InitialCondition::SineX => ScalarField::from_fn(n, |x, _| (2.0 * PI * x).sin()),
            InitialCondition::TwoModes => {
                ScalarField::from_fn(n, |x, y| (2.0 * PI * x).sin() + (4.0 * PI * y).sin())
            }
            InitialCondition::RandomModes { seed, kmax } => random_modes(n, seed, kmax as i64),
        }
    }
}

/// Random smooth mean-zero field with unit `L²` norm (see
/// [`InitialCondition::RandomModes`]).
pub fn random_modes(n: usize, seed: u64, kmax: i64) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kx in 0..=kmax {
        for ky in -kmax..=kmax {
            // One representative per ±k pair.
            if kx == 0 && ky <= 0 {
                continue;
            }
            let k2 = (kx * kx + ky * ky) as f64;
            let amp = rng.gen_range(0.0..1.0) / k2;
            let phase = rng.gen_range(0.0..2.0 * PI);
            modes.push((kx as f64, ky as f64, amp, phase));
        }
    }
    let raw = ScalarField::from_fn(n, |x, y| {
        modes
            .iter()
            .map(|&(kx, ky, a, p)| a * (2.0 * PI * (kx * x + ky * y) + p).cos())
            .sum()
    })?;
    let raw = project_mean_zero(&raw);
    let l2 = raw.l2_norm();
    Ok(raw.scaled(1.0 / l2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_modes_are_normalised_and_deterministic() {
        let a = random_modes(32, 5, 3).unwrap();
        let b = random_modes(32, 5, 3).unwrap();
        assert_eq!(a, b);
        assert!((a.l2_norm() - 1.0).abs() < 1e-12);
        assert!(a.is_mean_zero());
        assert_ne!(a, random_modes(32, 6, 3).unwrap());
    }
}
