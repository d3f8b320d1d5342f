//! Paired integrations and the error energy between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::ns_solver::{Dynamics, Solver, SolverConfig, Trajectory};
use crate::random;

/// Band-localised divergence-free perturbation `δ` with `‖δ‖₂ = amplitude`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    /// Dyadic band `j₀`; the shell is `0.75·2^{j₀} ≤ |k| ≤ 1.5·2^{j₀}`.
    pub band: i32,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn shell(&self) -> (f64, f64) {
        let c = 2f64.powi(self.band);
        (0.75 * c, 1.5 * c)
    }

    pub fn realize(&self, grid: &crate::grid::GridSpec) -> Result<SpectralField> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param(format!(
                "perturbation amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        let (lo, hi) = self.shell();
        let unit = random::divergence_free(grid, lo, hi, &mut random::rng(self.seed))?;
        if unit.l2_norm_sq() == 0.0 {
            return Err(Error::Precondition(format!(
                "band {} carries no resolved wavenumbers",
                self.band
            )));
        }
        Ok(unit.scale(self.amplitude))
    }
}

#[derive(Clone, Debug)]
pub struct TwinRun {
    pub traj_u: Trajectory,
    pub traj_v: Trajectory,
    pub perturbation: Option<PerturbationSpec>,
}

impl TwinRun {
    /// Pairs two trajectories, checking that they share grid and cadence.
    pub fn from_trajectories(
        traj_u: Trajectory,
        traj_v: Trajectory,
        perturbation: Option<PerturbationSpec>,
    ) -> Result<Self> {
        if traj_u.grid != traj_v.grid {
            return Err(Error::GridMismatch);
        }
        if traj_u.config != traj_v.config || traj_u.times != traj_v.times {
            return Err(Error::param("twin trajectories differ in configuration or snapshot times"));
        }
        Ok(Self {
            traj_u,
            traj_v,
            perturbation,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.traj_u.times
    }

    pub fn len(&self) -> usize {
        self.traj_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj_u.is_empty()
    }

    /// `w = u − v` at snapshot `i`, recomputed from the pair.
    pub fn error_at(&self, i: usize) -> SpectralField {
        self.traj_u.snapshots[i]
            .sub(&self.traj_v.snapshots[i])
            .expect("twin snapshots share a grid")
    }

    pub fn errors(&self) -> Vec<SpectralField> {
        (0..self.len()).map(|i| self.error_at(i)).collect()
    }

    /// The same pair with the roles of `u` and `v` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            traj_u: self.traj_v.clone(),
            traj_v: self.traj_u.clone(),
            perturbation: self.perturbation,
        }
    }
}

/// Runs `u₀` and `v₀` concurrently under the same solver setup.
pub fn run_pair(
    u0: &SpectralField,
    v0: &SpectralField,
    config: SolverConfig,
    dynamics: Dynamics,
) -> Result<TwinRun> {
    let solver = Solver::new(u0.grid(), config, dynamics)?;
    let (a, b) = rayon::join(|| solver.run(u0), || solver.run(v0));
    TwinRun::from_trajectories(a?, b?, None)
}

/// Navier–Stokes twin from `u₀` and `v₀ = u₀ + δ`.
pub fn run_twin(u0: &SpectralField, spec: PerturbationSpec, config: SolverConfig) -> Result<TwinRun> {
    let delta = spec.realize(u0.grid())?;
    let v0 = u0.add(&delta)?;
    let mut twin = run_pair(u0, &v0, config, Dynamics::NavierStokes)?;
    twin.perturbation = Some(spec);
    Ok(twin)
}

/// `E_Δ = ‖u − v‖₂²` and the de-correlation comparator `(γ/2)(‖u‖₂² + ‖v‖₂²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnergyTrace {
    pub gamma: f64,
    pub times: Vec<f64>,
    pub error_energy: Vec<f64>,
    pub comparator: Vec<f64>,
    pub predictable: Vec<bool>,
}

pub fn error_energy_trace(twin: &TwinRun, gamma: f64) -> ErrorEnergyTrace {
    let n = twin.len();
    let mut error_energy = Vec::with_capacity(n);
    let mut comparator = Vec::with_capacity(n);
    for i in 0..n {
        let u = &twin.traj_u.snapshots[i];
        let v = &twin.traj_v.snapshots[i];
        error_energy.push(twin.error_at(i).l2_norm_sq());
        comparator.push(0.5 * gamma * (u.l2_norm_sq() + v.l2_norm_sq()));
    }
    let predictable = error_energy.iter().zip(&comparator).map(|(e, c)| e < c).collect();
    ErrorEnergyTrace {
        gamma,
        times: twin.times().to_vec(),
        error_energy,
        comparator,
        predictable,
    }
}
