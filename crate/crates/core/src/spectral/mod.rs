//! Periodic grid fields, Fourier transforms, differentiation and the
//! Lebesgue / homogeneous Sobolev norms.
//!
//! All norms are lattice surrogates of their continuum counterparts: integrals
//! are uniform-grid means over the unit square and Sobolev weights run over
//! the discrete wavevectors `k ∈ [-n/2, n/2)²`.

pub mod fft;
mod field;
mod norms;
pub mod snapshot;

pub use fft::{wavenumber, Fft2};
pub use field::{project_mean_zero, ScalarField, MEAN_ZERO_TOL};
pub use norms::{
    gradient, gradient_coefficients, gradient_l1_norm, gradient_l2_norm, lebesgue_norm,
    sobolev_norm, SobolevOrder,
};
pub(crate) use norms::lebesgue_norm_of_values;
