//! Pseudo-spectral incompressible Navier–Stokes laboratory on the periodic
//! box, with error-field diagnostics at three notions of scale: physical
//! regions, dyadic frequency bands and lattice volume elements.

pub mod calibration;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod heat_flow;
pub mod lab;
pub mod lattice_scales;
pub mod littlewood_paley;
pub mod ns_solver;
pub mod quadrature;
pub mod random;
pub mod snapshot;
pub mod transport;
pub mod verdict;

pub use error::{Error, Result};
pub use field::{lp_norm, min_inf_grad, norm, NormReport, PhysicalField, Representation, SpectralField};
pub use grid::GridSpec;
pub use heat_flow::heat_evolve;
pub use lattice_scales::{CubeLattice, SparsenessCertificate};
pub use littlewood_paley::{BandSelector, BandSystem, BesovReport};
pub use verdict::{LemmaVerdict, Outcome, RatioReport};
pub use calibration::{CalibrationConstants, CalibrationLedger, Constant, Provenance};
pub use harness::SuiteReport;
pub use lab::predictability::{PredictabilityParams, PredictabilityVerdict, Scale};
pub use lab::trace::{SeparationTrace, TraceConfig};
pub use lab::twin::{PerturbationSpec, TwinRun};
pub use ns_solver::{Dynamics, Solver, SolverConfig, Trajectory};
