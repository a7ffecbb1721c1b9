//! Subcommand implementations. Each returns a typed result and leaves exit
//! codes to the caller.

pub mod check;
pub mod krdist;
pub mod report;
pub mod simulate;
pub mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub use check::{cmd_check, CheckReport, CheckRow};
pub use krdist::{cmd_krdist, KrInput, KrRequest};
pub use report::{cmd_report, ReportSummary};
pub use simulate::{cmd_simulate, RunOutcome};
pub use sweep::{cmd_sweep, LedgerEntry, SweepReport, SweepRun};

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(CliError::io(path))
}

pub(crate) fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

pub(crate) fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Ordered `key = value` lines describing a run directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Shortest round-tripping form, with exponents for tiny values.
    pub fn push_num(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:?}"));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Manifest { entries }
    }
}

/// JSON with non-finite numbers written as strings, so `inf` survives.
pub(crate) fn finite_or_string(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(v.to_string())
    }
}
