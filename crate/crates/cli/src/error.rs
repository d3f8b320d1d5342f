use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("manifest: {0}")]
    Manifest(String),

    #[error("cannot load calibration ledger {path}: {source}\nrun `scalesep calibrate` to produce one, or drop --ledger and SCALESEP_LEDGER to use the built-in ledger")]
    Ledger { path: PathBuf, source: scalesep::Error },

    #[error(transparent)]
    Core(#[from] scalesep::Error),

    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    /// 3 for anything the user can fix in the manifest or environment, 4 for
    /// internal failures.
    pub fn exit_code(&self) -> i32 {
        use scalesep::Error as E;
        match self {
            CliError::Manifest(_) | CliError::Ledger { .. } => 3,
            CliError::Core(
                E::InvalidGrid(_)
                | E::InvalidParameter(_)
                | E::Precondition(_)
                | E::SolverAbort { .. }
                | E::NonFinite { .. },
            ) => 3,
            CliError::Core(_) | CliError::Io { .. } => 4,
        }
    }
}
