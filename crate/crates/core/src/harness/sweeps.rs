//! Randomized sweeps of the ratio inequalities and the local existence time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{case_seeds, SuiteReport};
use crate::error::Result;
use crate::field::{norm, PhysicalField, SpectralField};
use crate::grid::GridSpec;
use crate::heat_flow::{bilinear_estimate_check, tsai_phi};
use crate::lattice_scales::CubeLattice;
use crate::littlewood_paley::BandSystem;
use crate::ns_solver::{Dynamics, Solver, SolverConfig};
use crate::random;

/// Measured ratios of one sweep, evaluated against a bound afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub name: String,
    /// Ratios of non-vacuous cases.
    pub ratios: Vec<f64>,
    pub vacuous: usize,
}

impl RatioSample {
    pub fn max(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn against(&self, constant: &str, bound: f64) -> SuiteReport {
        let mut r = SuiteReport::new(&self.name, constant, bound);
        self.ratios.iter().for_each(|&x| r.record_ratio(x));
        for _ in 0..self.vacuous {
            r.record(crate::verdict::Outcome::NotApplicable, f64::NAN, f64::NAN);
        }
        r
    }
}

const BERNSTEIN_PAIRS: [(f64, f64); 5] = [
    (2.0, 2.0),
    (4.0, 2.0),
    (f64::INFINITY, 2.0),
    (4.0, 4.0),
    (f64::INFINITY, f64::INFINITY),
];

/// Gradient and integrability ratios over every band of random band-limited
/// fields at `n = 64`.
pub fn bernstein_sweep(count: usize, seed: u64) -> Result<(RatioSample, RatioSample)> {
    let grid = GridSpec::periodic(2, 64, 1.0)?;
    let bands = BandSystem::new(&grid)?;
    let (lo, hi) = bands.band_range();
    let rows: Vec<Vec<(f64, f64, bool)>> = case_seeds(seed, 400, count)
        .into_par_iter()
        .map(|s| {
            let f = random::band_limited(&grid, 2, 0.0, 21.0, &mut random::rng(s))?;
            let mut out = Vec::new();
            for j in lo..=hi {
                for (p, q) in BERNSTEIN_PAIRS {
                    let r = bands.bernstein_check(&f, j, p, q)?;
                    out.push((r.gradient_ratio, r.integrability_ratio, r.vacuous));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut grad = RatioSample {
        name: "bernstein-gradient".into(),
        ratios: Vec::new(),
        vacuous: 0,
    };
    let mut integ = RatioSample {
        name: "bernstein-integrability".into(),
        ratios: Vec::new(),
        vacuous: 0,
    };
    for (g, i, vac) in rows.into_iter().flatten() {
        if vac {
            grad.vacuous += 1;
            integ.vacuous += 1;
        } else {
            grad.ratios.push(g);
            integ.ratios.push(i);
        }
    }
    Ok((grad, integ))
}

/// `‖f − J_h f‖₂ / (h‖∇f‖₂)` over random smooth fields and `h = dx·{2,4,8,16}`,
/// plus the `sin x₁` refinement family.
pub fn poincare_sweep(count: usize, seed: u64) -> Result<RatioSample> {
    let grid = GridSpec::periodic(2, 128, 1.0)?;
    let lattices: Vec<CubeLattice> = [2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|m| CubeLattice::new(&grid, m * grid.spacing(), false))
        .collect::<Result<_>>()?;
    let mut fields: Vec<SpectralField> = case_seeds(seed, 500, count)
        .into_iter()
        .enumerate()
        .map(|(i, s)| random::smooth_spectrum(&grid, 2, 40.0, [0.5, 1.0, 2.0][i % 3], &mut random::rng(s)))
        .collect::<Result<_>>()?;
    fields.push(PhysicalField::vector_from_fn(grid, |x| [x[0].sin(), 0.0, 0.0]).to_spectral()?);
    let rows: Vec<Vec<crate::verdict::RatioReport>> = fields
        .par_iter()
        .map(|f| lattices.iter().map(|l| l.poincare_check(f)).collect())
        .collect::<Result<_>>()?;
    let mut out = RatioSample {
        name: "poincare".into(),
        ratios: Vec::new(),
        vacuous: 0,
    };
    for r in rows.into_iter().flatten() {
        if r.vacuous {
            out.vacuous += 1;
        } else {
            out.ratios.push(r.ratio);
        }
    }
    Ok(out)
}

/// `‖I_{h,t}f‖_p / ‖J_h f‖_p` for `h = dx·{2,4,8}`, `t/h² ∈ {¼, 1, 4}`, `p ∈ {2, ∞}`.
pub fn gaussian_interpolant_sweep(count: usize, seed: u64) -> Result<RatioSample> {
    let grid = GridSpec::periodic(2, 64, 1.0)?;
    let lattices: Vec<CubeLattice> = [2.0, 4.0, 8.0]
        .iter()
        .map(|m| CubeLattice::new(&grid, m * grid.spacing(), false))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Option<f64>>> = case_seeds(seed, 600, count)
        .into_par_iter()
        .map(|s| {
            let f = random::smooth_spectrum(&grid, 2, 21.0, 1.0, &mut random::rng(s))?.to_physical();
            let mut out = Vec::new();
            for l in &lattices {
                let jh = l.interpolant_jh(&f)?;
                for c in [0.25, 1.0, 4.0] {
                    let iht = l.interpolant_iht(&f, c * l.h() * l.h())?;
                    for p in [2.0, f64::INFINITY] {
                        let den = norm(&jh, p)?;
                        out.push((den > 0.0).then(|| norm(&iht, p).map(|n| n / den)).transpose()?);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut out = RatioSample {
        name: "gaussian-interpolant".into(),
        ratios: Vec::new(),
        vacuous: 0,
    };
    for r in rows.into_iter().flatten() {
        match r {
            Some(x) => out.ratios.push(x),
            None => out.vacuous += 1,
        }
    }
    Ok(out)
}

/// Exponent pairs `(a, b)` of the convolution sweep.
pub const TSAI_EXPONENTS: [(f64, f64); 6] = [(2.0, 2.0), (3.0, 2.0), (2.0, 3.0), (3.0, 3.0), (4.0, 4.0), (1.5, 2.5)];
pub const TSAI_DISTANCES: [f64; 4] = [0.0, 1.0, 4.0, 16.0];

pub fn tsai_sweep() -> Result<RatioSample> {
    let jobs: Vec<(f64, f64, f64)> = TSAI_EXPONENTS
        .iter()
        .flat_map(|&(a, b)| TSAI_DISTANCES.iter().map(move |&x| (x, a, b)))
        .collect();
    let ratios = jobs
        .par_iter()
        .map(|&(x, a, b)| tsai_phi(x, a, b).map(|r| r.ratio))
        .collect::<Result<_>>()?;
    Ok(RatioSample {
        name: "space-time-convolution".into(),
        ratios,
        vacuous: 0,
    })
}

const BILINEAR_PAIRS: [(f64, f64); 4] = [(2.0, 2.0), (4.0, 2.0), (4.0, 4.0), (f64::INFINITY, 4.0)];

/// `‖B(u,v)(τ)‖_p` over the kernel-weighted integral for Navier–Stokes
/// trajectories from random data (`n = 32`, `ν = 0.1`, `τ = 0.2`, 9 nodes).
pub fn bilinear_sweep(count: usize, seed: u64) -> Result<RatioSample> {
    let grid = GridSpec::periodic(2, 32, 0.1)?;
    let tau = 0.2;
    let cfg = SolverConfig::new(tau / 16.0, tau).with_stride(2);
    let rows: Vec<Vec<crate::verdict::RatioReport>> = case_seeds(seed, 700, count)
        .into_par_iter()
        .map(|s| {
            let mut rng = random::rng(s);
            let u0 = random::divergence_free(&grid, 1.0, 6.0, &mut rng)?.scale(3.0);
            let v0 = random::divergence_free(&grid, 1.0, 6.0, &mut rng)?.scale(3.0);
            let solver = Solver::new(&grid, cfg, Dynamics::NavierStokes)?;
            let (tu, tv) = (solver.run(&u0)?, solver.run(&v0)?);
            BILINEAR_PAIRS
                .iter()
                .map(|&(p, q)| bilinear_estimate_check(&tu.snapshots, &tv.snapshots, tau, p, q, 1.0).map(|r| r.ratio))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = RatioSample {
        name: "bilinear".into(),
        ratios: Vec::new(),
        vacuous: 0,
    };
    for r in rows.into_iter().flatten() {
        if r.vacuous {
            out.vacuous += 1;
        } else {
            out.ratios.push(r.ratio);
        }
    }
    Ok(out)
}

/// Local existence sweep result for one exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceTimeSample {
    pub p: f64,
    /// `T_d ‖u₀‖_p^{2p/(p−d)}` per run, with `T_d` censored at the horizon.
    pub scaled_times: Vec<f64>,
    pub censored: usize,
}

impl ExistenceTimeSample {
    /// Largest constant below every observed scaled doubling time.
    pub fn constant(&self) -> f64 {
        self.scaled_times.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `2p/(p−d)`, or `2` for `p = ∞`.
fn existence_exponent(dim: usize, p: f64) -> f64 {
    if p.is_infinite() {
        2.0
    } else {
        2.0 * p / (p - dim as f64)
    }
}

/// Doubling times of `‖u(t)‖_p` for 3D Navier–Stokes at `ν = 1`, `n = 16`,
/// from random data with sup norms `{4, 8, 16, 32}`. Runs stop at
/// `horizon·‖u₀‖_∞^{−2}`; runs that never double are censored there.
pub fn existence_time_sweep(per_amplitude: usize, horizon: f64, seed: u64) -> Result<Vec<ExistenceTimeSample>> {
    let grid = GridSpec::periodic(3, 16, 1.0)?;
    let ps = [4.0, f64::INFINITY];
    let amps = [4.0, 8.0, 16.0, 32.0];
    let jobs: Vec<(f64, u64)> = amps
        .iter()
        .zip(0u64..)
        .flat_map(|(&a, k)| case_seeds(seed, 800 + k, per_amplitude).into_iter().map(move |s| (a, s)))
        .collect();
    let rows: Vec<Vec<(f64, bool)>> = jobs
        .par_iter()
        .map(|&(amp, s)| {
            let unit = random::divergence_free(&grid, 1.0, 3.0, &mut random::rng(s))?;
            let u0 = unit.scale(amp / unit.to_physical().max_magnitude());
            let t_max = horizon / (amp * amp);
            let dt_cfl = 0.4 * grid.spacing() / (2.0 * amp);
            let steps = (t_max / dt_cfl).ceil().max(8.0) as usize;
            let cfg = SolverConfig::new(t_max / steps as f64, t_max).with_stride(1);
            let traj = Solver::new(&grid, cfg, Dynamics::NavierStokes)?.run(&u0)?;
            ps.iter()
                .map(|&p| {
                    let n0 = norm(&u0.to_physical(), p)?;
                    let mut doubling = None;
                    for (t, u) in traj.times.iter().zip(&traj.snapshots) {
                        if norm(&u.to_physical(), p)? > 2.0 * n0 {
                            doubling = Some(*t);
                            break;
                        }
                    }
                    let td = doubling.unwrap_or(t_max);
                    Ok((td * n0.powf(existence_exponent(3, p)), doubling.is_none()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(ps
        .iter()
        .enumerate()
        .map(|(k, &p)| ExistenceTimeSample {
            p,
            scaled_times: rows.iter().map(|r| r[k].0).collect(),
            censored: rows.iter().filter(|r| r[k].1).count(),
        })
        .collect())
}
