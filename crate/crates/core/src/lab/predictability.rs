//! Predictability monitor: where the error is mostly small scale relative to
//! the flow's own length scale, its energy must decay.
//!
//! Velocities enter through the viscous scale
//! `m = min{‖u‖_∞/ν, √(‖∇u‖_∞/ν)}` (an inverse length), so that the
//! condition and the decay margin are dimensionally consistent for any `ν`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{norm, SpectralField};
use crate::grid::GridSpec;
use crate::lattice_scales::CubeLattice;
use crate::littlewood_paley::{BandSelector, BandSystem};

use super::twin::TwinRun;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scale {
    /// Dyadic cut `J`: low part `Δ_{≤J}`, high part `Δ_{>J}`.
    Band { j: i32 },
    /// Lattice spacing `h` (requested); low part `J_h`, high part `1 − J_h`.
    Lattice { h: f64 },
}

impl Scale {
    /// `2^{2J}` or `h⁻²`, with `h` the snapped spacing.
    fn inverse_length_sq(&self, grid: &GridSpec) -> Result<Option<f64>> {
        match *self {
            Scale::Band { j } => Ok(Some(4f64.powi(j))),
            Scale::Lattice { h } => Ok(snapped_lattice(grid, h)?.map(|l| l.h().powi(-2))),
        }
    }
}

fn snapped_lattice(grid: &GridSpec, h: f64) -> Result<Option<CubeLattice>> {
    if !(h.is_finite() && h >= grid.spacing() && h <= grid.period()) {
        return Ok(None);
    }
    match CubeLattice::new(grid, h, true) {
        Ok(l) => Ok(Some(l)),
        Err(Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityParams {
    pub c5: f64,
    /// Constant `C` in the decay margin.
    pub decay_rate: f64,
}

impl PredictabilityParams {
    pub fn new(c5: f64, decay_rate: f64) -> Result<Self> {
        if !(c5 > 0.0 && decay_rate > 0.0) {
            return Err(Error::param(format!("c5 and C must be positive, got {c5}, {decay_rate}")));
        }
        Ok(Self { c5, decay_rate })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityVerdict {
    pub time: f64,
    pub scale: Scale,
    /// Snapped lattice spacing for lattice scales.
    pub h_snapped: Option<f64>,
    /// Viscous scale `m` of the background at this time.
    pub m: f64,
    /// `‖low w‖₂² / ‖high w‖₂²`.
    pub condition_ratio: f64,
    /// `c₅ 2^{2J}/m² − 1` (or `c₅h⁻²/m² − 1`); `+∞` when `m = 0`.
    pub condition_threshold: f64,
    pub condition_holds: bool,
    /// `2^{2J} ≥ m²/c₅` (or `h⁻² ≥ m²/c₅`).
    pub scale_admissible: bool,
    pub decay_asserted: bool,
    /// `∂_t‖w‖₂² + ν C m²/(2c₅) ‖w‖₂²` from a centred difference.
    pub measured_decay_margin: f64,
}

impl PredictabilityVerdict {
    /// Decay was asserted but the measured margin is not negative.
    pub fn is_counterexample(&self) -> bool {
        self.decay_asserted && !(self.measured_decay_margin < 0.0)
    }
}

/// `min{‖u‖_∞/ν, √(‖∇u‖_∞/ν)}`.
pub fn viscous_scale(u: &SpectralField) -> f64 {
    let nu = u.grid().viscosity();
    let sup_u = u.to_physical().max_magnitude();
    let sup_grad = u.gradient().to_physical().max_magnitude();
    (sup_u / nu).min((sup_grad / nu).sqrt())
}

fn split_energies(bands: &BandSystem, w: &SpectralField, scale: Scale) -> Result<Option<(f64, f64)>> {
    match scale {
        Scale::Band { j } => {
            let low = bands.project(w, BandSelector::at_most(j))?.l2_norm_sq();
            let high = bands.project(w, BandSelector::above(j))?.l2_norm_sq();
            Ok(Some((low, high)))
        }
        Scale::Lattice { h } => {
            let Some(lat) = snapped_lattice(w.grid(), h)? else {
                return Ok(None);
            };
            let wp = w.to_physical();
            let low = lat.interpolant_jh(&wp)?;
            let high = wp.sub(&low)?;
            Ok(Some((norm(&low, 2.0)?.powi(2), norm(&high, 2.0)?.powi(2))))
        }
    }
}

fn split_ratio(low: f64, high: f64) -> f64 {
    if high > 0.0 {
        low / high
    } else if low > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Evaluates both criterion inequalities at every interior snapshot and every
/// scale of the ladder; band cuts outside the partition and lattice spacings
/// outside `[dx, L]` are skipped, as are the first and last snapshots.
pub fn predictability_series(
    bands: &BandSystem,
    times: &[f64],
    errors: &[SpectralField],
    viscous_scales: &[f64],
    ladder: &[Scale],
    params: &PredictabilityParams,
) -> Result<Vec<PredictabilityVerdict>> {
    let n = times.len();
    if errors.len() != n || viscous_scales.len() != n {
        return Err(Error::param("times, errors and scales differ in length"));
    }
    if n < 3 {
        return Ok(Vec::new());
    }
    let grid = *bands.grid();
    if errors.iter().any(|w| w.grid() != &grid) {
        return Err(Error::GridMismatch);
    }
    let nu = grid.viscosity();
    let energy: Vec<f64> = errors.iter().map(SpectralField::l2_norm_sq).collect();
    let (lo, hi) = bands.partition_range();
    let rows: Vec<Vec<PredictabilityVerdict>> = (1..n - 1)
        .into_par_iter()
        .map(|i| {
            let m = viscous_scales[i];
            let dedt = (energy[i + 1] - energy[i - 1]) / (times[i + 1] - times[i - 1]);
            let margin = dedt + nu * params.decay_rate * m * m / (2.0 * params.c5) * energy[i];
            let mut out = Vec::new();
            for &scale in ladder {
                if let Scale::Band { j } = scale {
                    if j < lo || j > hi {
                        continue;
                    }
                }
                let Some(inv_len_sq) = scale.inverse_length_sq(&grid)? else {
                    continue;
                };
                let Some((low, high)) = split_energies(bands, &errors[i], scale)? else {
                    continue;
                };
                let condition_ratio = split_ratio(low, high);
                let (condition_threshold, scale_admissible) = if m == 0.0 {
                    (f64::INFINITY, true)
                } else {
                    (
                        params.c5 * inv_len_sq / (m * m) - 1.0,
                        inv_len_sq >= m * m / params.c5,
                    )
                };
                let condition_holds = condition_ratio <= condition_threshold;
                let h_snapped = match scale {
                    Scale::Lattice { .. } => Some(inv_len_sq.powf(-0.5)),
                    Scale::Band { .. } => None,
                };
                out.push(PredictabilityVerdict {
                    time: times[i],
                    scale,
                    h_snapped,
                    m,
                    condition_ratio,
                    condition_threshold,
                    condition_holds,
                    scale_admissible,
                    decay_asserted: condition_holds && scale_admissible,
                    measured_decay_margin: margin,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Monitor on a twin run with `m = min{m(u), m(v)}` at each snapshot.
pub fn predictability_monitor(
    bands: &BandSystem,
    twin: &TwinRun,
    ladder: &[Scale],
    params: &PredictabilityParams,
) -> Result<Vec<PredictabilityVerdict>> {
    let errors = twin.errors();
    let scales: Vec<f64> = (0..twin.len())
        .into_par_iter()
        .map(|i| viscous_scale(&twin.traj_u.snapshots[i]).min(viscous_scale(&twin.traj_v.snapshots[i])))
        .collect();
    predictability_series(bands, twin.times(), &errors, &scales, ladder, params)
}

/// Bands from the partition's lowest cut to its top, and lattice spacings
/// `dx·{2, 4, 8}`.
pub fn default_ladder(bands: &BandSystem) -> Vec<Scale> {
    let (lo, hi) = bands.partition_range();
    let dx = bands.grid().spacing();
    (lo..=hi)
        .map(|j| Scale::Band { j })
        .chain([2.0, 4.0, 8.0].map(|f| Scale::Lattice { h: f * dx }))
        .collect()
}
