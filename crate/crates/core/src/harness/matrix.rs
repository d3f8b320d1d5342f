//! Synthetic matrix for the predictability criterion: linearised error
//! transport by frozen Taylor–Green backgrounds, Navier–Stokes Taylor–Green
//! twins, and a stress family of bumps placed on the compressive axis of a
//! stagnation point, whose energy grows under the frozen strain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{case_seeds, SuiteReport};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::lab::predictability::{default_ladder, predictability_series, viscous_scale, PredictabilityParams, PredictabilityVerdict, Scale};
use crate::lab::twin::{run_twin, PerturbationSpec};
use crate::littlewood_paley::BandSystem;
use crate::ns_solver::{Dynamics, Solver, SolverConfig};
use crate::random;
use crate::verdict::Outcome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub n: usize,
    pub viscosity: f64,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    /// Background amplitudes of the frozen-transport runs.
    pub background_amplitudes: Vec<f64>,
    /// Perturbation bands `j₀`.
    pub bands: Vec<i32>,
    /// `‖δ₀‖₂` of the Navier–Stokes twins.
    pub twin_amplitude: f64,
    pub stress: StressConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressConfig {
    pub viscosities: Vec<f64>,
    pub background_amplitudes: Vec<f64>,
    /// Gaussian widths of the initial bump.
    pub widths: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
}

impl StressConfig {
    pub fn standard() -> Self {
        Self {
            viscosities: vec![0.01, 0.003],
            background_amplitudes: vec![1.0, 2.0],
            widths: vec![0.1, 0.2, 0.4],
            dt: 0.005,
            t_end: 2.0,
            stride: 4,
        }
    }

    pub fn none() -> Self {
        Self {
            viscosities: Vec::new(),
            ..Self::standard()
        }
    }
}

impl MatrixConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            n: 64,
            viscosity: 0.1,
            dt: 0.01,
            t_end: 0.5,
            stride: 2,
            background_amplitudes: vec![0.05, 0.5, 2.0],
            bands: vec![1, 2, 3, 4],
            twin_amplitude: 1e-3,
            stress: StressConfig::standard(),
            seed,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::periodic(2, self.n, self.viscosity)
    }
}

/// Error series of one matrix member.
#[derive(Clone, Debug)]
pub struct MatrixRun {
    pub label: String,
    pub times: Vec<f64>,
    pub errors: Vec<SpectralField>,
    pub viscous_scales: Vec<f64>,
}

fn stress_runs(cfg: &StressConfig, n: usize) -> Result<Vec<MatrixRun>> {
    let solver_cfg = SolverConfig::new(cfg.dt, cfg.t_end).with_stride(cfg.stride);
    let mut jobs = Vec::new();
    for &nu in &cfg.viscosities {
        for &a in &cfg.background_amplitudes {
            for &w in &cfg.widths {
                jobs.push((nu, a, w));
            }
        }
    }
    jobs.par_iter()
        .map(|&(nu, a, width)| {
            let grid = GridSpec::periodic(2, n, nu)?;
            let background = random::taylor_green(&grid)?.scale(a);
            let m = viscous_scale(&background);
            // The background strains as diag(a, −a) at the origin.
            let w0 = random::gaussian_bump(&grid, [0.0; 3], width, [0.0, 1.0, 0.0])
                .to_spectral()?
                .leray_project()?;
            let traj = Solver::new(&grid, solver_cfg, Dynamics::FrozenAdvection(background))?.run(&w0)?;
            Ok(MatrixRun {
                label: format!("stress-nu{nu}-A{a}-width{width}"),
                viscous_scales: vec![m; traj.len()],
                times: traj.times,
                errors: traj.snapshots,
            })
        })
        .collect()
}

/// Integrates every member of the matrix.
pub fn build_matrix(cfg: &MatrixConfig) -> Result<Vec<MatrixRun>> {
    let grid = cfg.grid()?;
    let solver_cfg = SolverConfig::new(cfg.dt, cfg.t_end).with_stride(cfg.stride);
    let tg = random::taylor_green(&grid)?;
    let seeds = case_seeds(cfg.seed, 900, cfg.bands.len());
    let mut jobs: Vec<(Option<f64>, i32, u64)> = Vec::new();
    for (&band, &seed) in cfg.bands.iter().zip(&seeds) {
        for &a in &cfg.background_amplitudes {
            jobs.push((Some(a), band, seed));
        }
        jobs.push((None, band, seed));
    }
    let mut runs: Vec<MatrixRun> = jobs
        .par_iter()
        .map(|&(amp, band, seed)| match amp {
            Some(a) => {
                let background = tg.scale(a);
                let m = viscous_scale(&background);
                let w0 = PerturbationSpec { amplitude: 1.0, band, seed }.realize(&grid)?;
                let traj = Solver::new(&grid, solver_cfg, Dynamics::FrozenAdvection(background))?.run(&w0)?;
                Ok(MatrixRun {
                    label: format!("frozen-A{a}-band{band}"),
                    viscous_scales: vec![m; traj.len()],
                    times: traj.times,
                    errors: traj.snapshots,
                })
            }
            None => {
                let spec = PerturbationSpec {
                    amplitude: cfg.twin_amplitude,
                    band,
                    seed,
                };
                let twin = run_twin(&tg, spec, solver_cfg)?;
                let viscous_scales = (0..twin.len())
                    .map(|i| viscous_scale(&twin.traj_u.snapshots[i]).min(viscous_scale(&twin.traj_v.snapshots[i])))
                    .collect();
                Ok(MatrixRun {
                    label: format!("twin-band{band}"),
                    times: twin.times().to_vec(),
                    errors: twin.errors(),
                    viscous_scales,
                })
            }
        })
        .collect::<Result<_>>()?;
    runs.extend(stress_runs(&cfg.stress, cfg.n)?);
    Ok(runs)
}

/// Band systems and default ladders for the grids of a matrix.
pub struct MatrixScales {
    entries: Vec<(GridSpec, BandSystem, Vec<Scale>)>,
}

impl MatrixScales {
    pub fn for_runs(runs: &[MatrixRun]) -> Result<Self> {
        let mut entries: Vec<(GridSpec, BandSystem, Vec<Scale>)> = Vec::new();
        for run in runs {
            let grid = *run.errors.first().ok_or_else(|| Error::param("matrix run without snapshots"))?.grid();
            if entries.iter().all(|e| e.0 != grid) {
                let bands = BandSystem::new(&grid)?;
                let ladder = default_ladder(&bands);
                entries.push((grid, bands, ladder));
            }
        }
        Ok(Self { entries })
    }

    fn get(&self, grid: &GridSpec) -> Result<(&BandSystem, &[Scale])> {
        self.entries
            .iter()
            .find(|e| &e.0 == grid)
            .map(|e| (&e.1, e.2.as_slice()))
            .ok_or(Error::GridMismatch)
    }
}

/// A matrix verdict with the run it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixVerdict {
    pub run: String,
    #[serde(flatten)]
    pub verdict: PredictabilityVerdict,
}

/// Evaluates the criterion on every run. Only verdicts where both
/// inequalities hold are tallied; each passes when the measured margin is
/// negative. The recorded margin is `−margin/‖w‖₂²`.
pub fn evaluate_matrix(
    runs: &[MatrixRun],
    scales: &MatrixScales,
    params: &PredictabilityParams,
) -> Result<(SuiteReport, Vec<MatrixVerdict>)> {
    let mut report = SuiteReport::new("predictability-matrix", "c5", params.c5);
    let mut all = Vec::new();
    for run in runs {
        let (bands, ladder) = scales.get(run.errors[0].grid())?;
        let verdicts = predictability_series(bands, &run.times, &run.errors, &run.viscous_scales, ladder, params)?;
        for v in &verdicts {
            if !v.decay_asserted {
                continue;
            }
            let energy = run.errors[run.times.iter().position(|&t| t == v.time).unwrap_or(0)].l2_norm_sq();
            let outcome = if v.is_counterexample() { Outcome::Fail } else { Outcome::Pass };
            let rel = if energy > 0.0 { -v.measured_decay_margin / energy } else { f64::NAN };
            report.record(outcome, rel, f64::NAN);
        }
        all.extend(verdicts.into_iter().map(|verdict| MatrixVerdict {
            run: run.label.clone(),
            verdict,
        }));
    }
    Ok((report, all))
}
