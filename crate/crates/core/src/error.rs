use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, solver or protocol parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The exact transport solver refuses supports above its cap.
    #[error("support of {size} cells exceeds the exact-solver cap of {cap}; use the entropic solver or coarse-grain the field")]
    Capacity { size: usize, cap: usize },

    /// A time step violates the advective CFL bound.
    #[error("CFL violation: max|u|*dt*n = {cfl:.4} > 0.5; use dt <= {suggested_dt:.3e}")]
    Cfl { cfl: f64, suggested_dt: f64 },

    /// A transport run produced filaments below the resolvable scale.
    #[error("under-resolved at t = {t:.4}: filament scale {scale:.3e} below {threshold:.3e}")]
    Underresolved {
        t: f64,
        scale: f64,
        threshold: f64,
        partial: Box<crate::solver::SimulationSeries>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
