//! Numerical kernels for flow-enhanced mixing of passive scalars on the
//! periodic unit square.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`] holds the periodic grid field, its Fourier view and every
//!   Lebesgue / homogeneous Sobolev norm used elsewhere.
//! * [`flow`] builds divergence-free stirring protocols, normalises them to a
//!   velocity-gradient budget and integrates Lagrangian trajectories.
//! * [`solver`] advances the advection-diffusion equation (integrating-factor
//!   RK4) and the pure transport equation (semi-Lagrangian), recording
//!   diagnostics and checking the energy identities.
//! * [`kr`] evaluates the logarithmic-cost Kantorovich–Rubinstein distance
//!   between the positive and negative parts of a field, exactly (min-cost
//!   flow) or approximately (log-domain Sinkhorn), together with its bounds.
//! * [`diagnostics`] extracts decay rates, length scales and crossover times
//!   from simulation series.

pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod initial;
pub mod kr;
mod quad;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
