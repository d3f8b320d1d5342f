//! Twin-run separation laboratory: paired trajectories, their error field and
//! the scale diagnostics measured on it.

pub mod diagnostics;
pub mod growth;
pub mod twin;
pub mod predictability;
pub mod self_similar;
pub mod trace;
