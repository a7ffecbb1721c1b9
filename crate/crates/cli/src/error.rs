use thiserror::Error;

/// Failures of a harness command, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    ConfigAt { path: String, line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] smix_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Core(smix_core::Error::Underresolved { .. }) => EXIT_INVARIANT,
            _ => EXIT_CONFIG,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.as_ref().display().to_string();
        move |source| CliError::Io { path, source }
    }
}
