//! Experiment harness: configuration, single runs, diffusivity sweeps, KR
//! distances, plot data and a quick invariant suite. The `smix` binary is a
//! thin argument parser over [`commands`].

pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fallback for `--threads`.
pub const THREADS_ENV: &str = "SMIX_THREADS";

/// Reads a config file, applies `--override` values, then `--seed`.
pub fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut doc = config::Document::parse(&text, &path.display().to_string())?;
    for o in overrides {
        doc.apply_override(o)?;
    }
    let mut cfg = ExperimentConfig::from_document(&doc)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

/// `--threads`, else `SMIX_THREADS`, else one worker per core.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> CliResult<usize> {
    let n = match (flag, env) {
        (Some(n), _) => n,
        (None, Some(v)) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        (None, None) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if n == 0 {
        return Err(CliError::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// `--out`, else the config's output directory, else `default`.
pub fn resolve_out(flag: Option<&Path>, config: Option<&ExperimentConfig>, default: &str) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.output.directory.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(default))
}
