//! Batch front-end of the separation laboratory.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;

use std::path::{Path, PathBuf};

use scalesep::CalibrationLedger;

pub use commands::Status;
pub use error::CliError;
pub use manifest::{Command, Manifest};

pub const LEDGER_ENV: &str = "SCALESEP_LEDGER";

/// Ledger path from the environment, else the flag; `None` means the
/// built-in ledger.
pub fn ledger_source(flag: Option<&Path>, env: Option<&str>) -> Option<PathBuf> {
    env.filter(|s| !s.is_empty()).map(PathBuf::from).or_else(|| flag.map(Path::to_path_buf))
}

pub fn load_ledger(path: Option<&Path>) -> Result<CalibrationLedger, CliError> {
    match path {
        None => Ok(CalibrationLedger::embedded()),
        Some(p) => CalibrationLedger::load(p).map_err(|source| CliError::Ledger {
            path: p.to_path_buf(),
            source,
        }),
    }
}
