use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample in component {component} at grid index {index} (x = {position:?})")]
    NonFinite {
        component: usize,
        index: usize,
        position: [f64; 3],
    },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("expected {expected} components, found {found}")]
    ComponentMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("solver aborted at step {step}: {reason}")]
    SolverAbort { step: usize, reason: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
