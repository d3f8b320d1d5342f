//! Pseudo-spectral incompressible Navier–Stokes on the periodic box.
//!
//! The linear term is integrated exactly by the factor `E = e^{−ν|k|²dt}`
//! and the projected nonlinearity `N(u) = −ℙ∇·(u⊗u)` by classical RK4 in
//! the integrating-factor variables:
//!
//! ```text
//! a  = N(u)
//! u₁ = E½(u + dt/2 a)          b = N(u₁)
//! u₂ = E½ u + dt/2 b           c = N(u₂)
//! u₃ = E u + dt E½ c           d = N(u₃)
//! u' = E u + dt/6 (E a + 2E½(b + c) + d)
//! ```

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{min_inf_grad, SpectralField, DIVERGENCE_TOL};
use crate::grid::GridSpec;
use crate::transport::projected_flux_divergence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    TwoThirds,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    IntegratingFactorRk4,
}

/// Right-hand side beyond the viscous term.
#[derive(Clone, Debug)]
pub enum Dynamics {
    /// `N(u) = −ℙ∇·(u⊗u)`.
    NavierStokes,
    /// No nonlinearity: pure viscous decay.
    Heat,
    /// Linearised transport by a fixed background `U`:
    /// `N(w) = −ℙ∇·(U⊗w + w⊗U)`.
    FrozenAdvection(SpectralField),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: Dealias,
    pub stepper: Stepper,
    /// Advective Courant bound `dt·max|u|/Δx ≤ cfl_max`.
    pub cfl_max: f64,
    /// Viscous bound `dt ≤ cfl_stability/(ν k_max²)`.
    pub cfl_stability: f64,
    pub snapshot_stride: usize,
    /// Permits 3D grids above `n = 64`.
    pub allow_large_3d: bool,
}

impl SolverConfig {
    pub const DEFAULT_CFL_MAX: f64 = 0.5;
    pub const DEFAULT_CFL_STABILITY: f64 = 2.8;
    pub const MAX_DEFAULT_3D_N: usize = 64;

    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            dealias: Dealias::TwoThirds,
            stepper: Stepper::IntegratingFactorRk4,
            cfl_max: Self::DEFAULT_CFL_MAX,
            cfl_stability: Self::DEFAULT_CFL_STABILITY,
            snapshot_stride: 1,
            allow_large_3d: false,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_dealias(mut self, dealias: Dealias) -> Self {
        self.dealias = dealias;
        self
    }

    /// Number of steps, requiring `t_end` to be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        let raw = self.t_end / self.dt;
        let steps = raw.round();
        if (raw - steps).abs() > 1e-9 * raw.max(1.0) {
            return Err(Error::param(format!(
                "t_end = {} is not a whole number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }

    /// Largest wavenumber magnitude carried by the scheme.
    pub fn k_max(&self, grid: &GridSpec) -> f64 {
        let per_axis = match self.dealias {
            Dealias::TwoThirds => grid.k0() * (grid.n() / 3) as f64,
            Dealias::None => grid.k_nyquist(),
        };
        per_axis * (grid.dim() as f64).sqrt()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::param("snapshot_stride must be at least 1"));
        }
        if !(self.cfl_max > 0.0) || !(self.cfl_stability > 0.0) {
            return Err(Error::param("CFL limits must be positive"));
        }
        if grid.dim() == 3 && grid.n() > Self::MAX_DEFAULT_3D_N && !self.allow_large_3d {
            return Err(Error::param(format!(
                "3D grids above n = {} need allow_large_3d",
                Self::MAX_DEFAULT_3D_N
            )));
        }
        self.steps()?;
        let k = self.k_max(grid);
        let limit = self.cfl_stability / (grid.viscosity() * k * k);
        if self.dt > limit {
            return Err(Error::Precondition(format!(
                "dt = {} exceeds the viscous stability limit {limit:.3e}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Per-snapshot scalar diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    pub time: f64,
    /// `½‖u‖₂²`.
    pub energy: f64,
    /// `ν‖∇u‖₂²`.
    pub dissipation: f64,
    pub max_speed: f64,
    pub min_inf_grad: f64,
}

impl Scalars {
    pub fn measure(u: &SpectralField, time: f64) -> Self {
        Self {
            time,
            energy: 0.5 * u.l2_norm_sq(),
            dissipation: u.grid().viscosity() * u.gradient_l2_sq(),
            max_speed: u.to_physical().max_magnitude(),
            min_inf_grad: min_inf_grad(u),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub config: SolverConfig,
    pub times: Vec<f64>,
    pub snapshots: Vec<SpectralField>,
    pub scalars: Vec<Scalars>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Uniform spacing between snapshots.
    pub fn snapshot_interval(&self) -> f64 {
        self.config.dt * self.config.snapshot_stride as f64
    }

    pub fn last(&self) -> &SpectralField {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

pub struct Solver {
    grid: GridSpec,
    config: SolverConfig,
    dynamics: Dynamics,
    mask: Vec<f64>,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
}

fn dealias_mask(grid: &GridSpec, dealias: Dealias) -> Vec<f64> {
    let wn = grid.wavenumbers();
    let keep = (grid.n() / 3) as i64;
    wn.modes
        .iter()
        .map(|m| match dealias {
            Dealias::None => 1.0,
            Dealias::TwoThirds => {
                if m.iter().all(|&v| v.abs() <= keep) {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect()
}

impl Solver {
    pub fn new(grid: &GridSpec, config: SolverConfig, dynamics: Dynamics) -> Result<Self> {
        config.validate(grid)?;
        let mask = dealias_mask(grid, config.dealias);
        let dynamics = match dynamics {
            Dynamics::FrozenAdvection(bg) => {
                if bg.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                let m = mask.clone();
                Dynamics::FrozenAdvection(bg.apply_multiplier(move |i| m[i]))
            }
            other => other,
        };
        let wn = grid.wavenumbers();
        let nu = grid.viscosity();
        let e_full = wn.k_sq.iter().map(|k2| (-nu * k2 * config.dt).exp()).collect();
        let e_half = wn.k_sq.iter().map(|k2| (-nu * k2 * 0.5 * config.dt).exp()).collect();
        Ok(Self {
            grid: *grid,
            config,
            dynamics,
            mask,
            e_full,
            e_half,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    /// Applies the alias mask.
    pub fn truncate(&self, u: &SpectralField) -> SpectralField {
        u.apply_multiplier(|i| self.mask[i])
    }

    fn nonlinear(&self, u: &SpectralField) -> Result<SpectralField> {
        let raw = match &self.dynamics {
            Dynamics::Heat => return Ok(SpectralField::zeros(self.grid, self.grid.dim())),
            Dynamics::NavierStokes => projected_flux_divergence(u, u)?.scale(-1.0),
            Dynamics::FrozenAdvection(bg) => projected_flux_divergence(bg, u)?.scale(-2.0),
        };
        Ok(self.truncate(&raw))
    }

    fn check_state(&self, u: &SpectralField) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if u.ncomp() != self.grid.dim() {
            return Err(Error::ComponentMismatch {
                expected: self.grid.dim(),
                found: u.ncomp(),
            });
        }
        Ok(())
    }

    /// Advances one step of size `dt`; `index` labels abort diagnostics.
    pub fn step(&self, u: &SpectralField, index: usize) -> Result<SpectralField> {
        self.check_state(u)?;
        let dt = self.config.dt;
        let ef = |f: &SpectralField| f.apply_multiplier(|i| self.e_full[i]);
        let eh = |f: &SpectralField| f.apply_multiplier(|i| self.e_half[i]);

        if !matches!(self.dynamics, Dynamics::Heat) {
            let speed = u.to_physical().max_magnitude();
            let courant = dt * speed / self.grid.spacing();
            if courant > self.config.cfl_max {
                return Err(Error::SolverAbort {
                    step: index,
                    reason: format!(
                        "advective CFL {courant:.3} exceeds {} (max speed {speed:.3e})",
                        self.config.cfl_max
                    ),
                });
            }
        }

        let a = self.nonlinear(u)?;
        let u1 = eh(&u.lincomb(1.0, &a, 0.5 * dt)?);
        let b = self.nonlinear(&u1)?;
        let eu_half = eh(u);
        let u2 = eu_half.lincomb(1.0, &b, 0.5 * dt)?;
        let c = self.nonlinear(&u2)?;
        let eu = ef(u);
        let u3 = eu.lincomb(1.0, &eh(&c), dt)?;
        let d = self.nonlinear(&u3)?;
        let bc = eh(&b.add(&c)?);
        let incr = ef(&a).lincomb(1.0, &bc, 2.0)?.add(&d)?;
        let next = eu.lincomb(1.0, &incr, dt / 6.0)?;

        if let Some((comp, idx)) = first_non_finite(&next) {
            return Err(Error::SolverAbort {
                step: index,
                reason: format!("non-finite coefficient in component {comp} at spectral index {idx}"),
            });
        }
        Ok(next)
    }

    /// Projects (with a warning) and truncates the initial state.
    pub fn prepare(&self, u0: &SpectralField) -> Result<SpectralField> {
        self.check_state(u0)?;
        let mut u = u0.clone();
        if !u.is_divergence_free() || u.divergence_residual()? > DIVERGENCE_TOL {
            let resid = u.divergence_residual()?;
            if resid > DIVERGENCE_TOL {
                warn!("initial data not divergence-free (residual {resid:.2e}); projecting");
            }
            u = u.leray_project()?;
        }
        Ok(self.truncate(&u))
    }

    pub fn run(&self, u0: &SpectralField) -> Result<Trajectory> {
        let steps = self.config.steps()?;
        let stride = self.config.snapshot_stride;
        let mut u = self.prepare(u0)?;
        let mut times = vec![0.0];
        let mut snapshots = vec![u.clone()];
        let mut scalars = vec![Scalars::measure(&u, 0.0)];
        for s in 1..=steps {
            u = self.step(&u, s)?;
            if s % stride == 0 {
                let t = s as f64 * self.config.dt;
                let certified = u.clone().certify_divergence_free()?;
                if !certified.is_divergence_free() {
                    return Err(Error::SolverAbort {
                        step: s,
                        reason: format!(
                            "divergence residual {:.2e} above tolerance",
                            certified.divergence_residual()?
                        ),
                    });
                }
                scalars.push(Scalars::measure(&certified, t));
                times.push(t);
                snapshots.push(certified);
            }
        }
        Ok(Trajectory {
            grid: self.grid,
            config: self.config,
            times,
            snapshots,
            scalars,
        })
    }
}

fn first_non_finite(u: &SpectralField) -> Option<(usize, usize)> {
    for (c, comp) in u.components().iter().enumerate() {
        if let Some(i) = comp.iter().position(|v: &Complex64| !v.re.is_finite() || !v.im.is_finite()) {
            return Some((c, i));
        }
    }
    None
}

/// One Navier–Stokes step of `state` under `config`.
pub fn step(state: &SpectralField, config: &SolverConfig) -> Result<SpectralField> {
    Solver::new(state.grid(), *config, Dynamics::NavierStokes)?.step(state, 1)
}

/// Navier–Stokes trajectory from `u0`.
pub fn run(u0: &SpectralField, config: &SolverConfig) -> Result<Trajectory> {
    Solver::new(u0.grid(), *config, Dynamics::NavierStokes)?.run(u0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalanceReport {
    /// Relative balance residual at each interior snapshot.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Audit of `dE/dt = −ν‖∇u‖₂²` at interior snapshots.
///
/// The centred difference `(E_{i+1} − E_{i−1})/2Δt` is compared with the
/// Simpson average of the dissipation over the same window, so both sides
/// are the exact mean rate over `[t_{i−1}, t_{i+1}]` up to `O(Δt⁴)`. The
/// residual is normalised by `ν‖∇u(t_i)‖₂²`.
pub fn energy_balance_check(traj: &Trajectory) -> Result<EnergyBalanceReport> {
    if traj.len() < 3 {
        return Err(Error::param("energy balance needs at least 3 snapshots"));
    }
    let h = traj.snapshot_interval();
    let s = &traj.scalars;
    let residuals: Vec<f64> = (1..s.len() - 1)
        .map(|i| {
            let de = (s[i + 1].energy - s[i - 1].energy) / (2.0 * h);
            let mean_diss = (s[i - 1].dissipation + 4.0 * s[i].dissipation + s[i + 1].dissipation) / 6.0;
            let diss = s[i].dissipation;
            if diss == 0.0 {
                de.abs()
            } else {
                (de + mean_diss).abs() / diss
            }
        })
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(EnergyBalanceReport {
        residuals,
        max_residual,
    })
}
