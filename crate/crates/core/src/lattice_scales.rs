//! Cube lattices on the grid: the cell-average interpolant `J_h`, its
//! Gaussian-weighted counterpart `I_{h,t}`, physical sparseness
//! certificates and the discrete decay lemma.
//!
//! A lattice of edge `h` groups `m = ⌊h/Δx⌋` consecutive grid points per
//! axis. When `m` does not divide `n` the last cell along each axis is
//! shorter. Each grid point stands for the cell of volume `Δx^d` around it,
//! so a lattice cell holding `m` points along an axis spans `[s−½, s+m−½)Δx`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{norm, PhysicalField, SpectralField};
use crate::grid::GridSpec;
use crate::heat_flow::decay_conclusion;
use crate::verdict::{LemmaVerdict, Outcome, RatioReport};

/// Relative tolerance used when snapping `h` to a multiple of the spacing.
const SNAP_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CubeLattice {
    grid: GridSpec,
    h_requested: f64,
    points_per_cell: usize,
    origin_centered: bool,
    offset: usize,
    cells_per_axis: usize,
    /// Cell index along one axis for every grid index.
    axis_cell: Vec<usize>,
    /// Number of grid points per cell along one axis.
    axis_size: Vec<usize>,
    /// Cell centre coordinate along one axis.
    axis_center: Vec<f64>,
}

impl CubeLattice {
    /// Lattice with edge `h` rounded down to a multiple of the grid spacing.
    ///
    /// With `origin_centered` the cell holding the origin is centred on it;
    /// otherwise cells start at grid index 0.
    pub fn new(grid: &GridSpec, h: f64, origin_centered: bool) -> Result<Self> {
        let dx = grid.spacing();
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param(format!("lattice edge must be positive, got {h}")));
        }
        let raw = (h / dx * (1.0 + SNAP_EPS)).floor();
        if raw < 1.0 {
            return Err(Error::Precondition(format!(
                "lattice edge h = {h} is below the grid spacing {dx}"
            )));
        }
        let n = grid.n();
        let m = (raw as usize).min(n);
        let offset = if origin_centered { (n - m / 2) % n } else { 0 };
        let cells_per_axis = n.div_ceil(m);
        let axis_cell: Vec<usize> = (0..n).map(|i| ((i + n - offset) % n) / m).collect();
        let axis_size: Vec<usize> = (0..cells_per_axis)
            .map(|c| m.min(n - c * m))
            .collect();
        let axis_center: Vec<f64> = (0..cells_per_axis)
            .map(|c| {
                let start = (offset + c * m) as f64;
                (start + 0.5 * (axis_size[c] as f64 - 1.0)) * dx
            })
            .collect();
        Ok(Self {
            grid: *grid,
            h_requested: h,
            points_per_cell: m,
            origin_centered,
            offset,
            cells_per_axis,
            axis_cell,
            axis_size,
            axis_center,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Snapped edge length.
    pub fn h(&self) -> f64 {
        self.points_per_cell as f64 * self.grid.spacing()
    }

    pub fn h_requested(&self) -> f64 {
        self.h_requested
    }

    pub fn points_per_cell(&self) -> usize {
        self.points_per_cell
    }

    pub fn origin_centered(&self) -> bool {
        self.origin_centered
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(self.grid.dim() as u32)
    }

    /// Whether every cell is a full `m^d` cube.
    pub fn is_uniform(&self) -> bool {
        self.grid.n() % self.points_per_cell == 0
    }

    /// Cell of a grid point.
    pub fn cell_of(&self, idx: usize) -> usize {
        let c = self.grid.coords(idx);
        let mut cell = 0;
        for &ca in c.iter().take(self.grid.dim()) {
            cell = cell * self.cells_per_axis + self.axis_cell[ca];
        }
        cell
    }

    /// Grid-point → cell map.
    pub fn cell_index_map(&self) -> Vec<usize> {
        (0..self.grid.len()).map(|i| self.cell_of(i)).collect()
    }

    fn cell_coords(&self, mut cell: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for a in (0..self.grid.dim()).rev() {
            c[a] = cell % self.cells_per_axis;
            cell /= self.cells_per_axis;
        }
        c
    }

    /// Number of grid points in a cell.
    pub fn cell_points(&self, cell: usize) -> usize {
        let c = self.cell_coords(cell);
        (0..self.grid.dim()).map(|a| self.axis_size[c[a]]).product()
    }

    /// Cell volume `|Q_i|` in physical units.
    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.cell_points(cell) as f64 * self.grid.cell_volume()
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 3] {
        let c = self.cell_coords(cell);
        let mut x = [0.0; 3];
        for a in 0..self.grid.dim() {
            x[a] = self.axis_center[c[a]];
        }
        x
    }

    fn check(&self, f: &PhysicalField) -> Result<()> {
        if f.grid() != &self.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Per-cell sums of one component.
    fn cell_sums(&self, samples: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.cell_count()];
        for (idx, v) in samples.iter().enumerate() {
            sums[self.cell_of(idx)] += v;
        }
        sums
    }

    fn broadcast(&self, per_cell: &[f64]) -> Vec<f64> {
        (0..self.grid.len()).map(|i| per_cell[self.cell_of(i)]).collect()
    }

    /// Piecewise-constant cell averages `J_h f`.
    pub fn interpolant_jh(&self, f: &PhysicalField) -> Result<PhysicalField> {
        self.check(f)?;
        let comps = f
            .components()
            .par_iter()
            .map(|c| {
                let sums = self.cell_sums(c);
                let avg: Vec<f64> = sums
                    .iter()
                    .enumerate()
                    .map(|(cell, s)| s / self.cell_points(cell) as f64)
                    .collect();
                self.broadcast(&avg)
            })
            .collect();
        PhysicalField::new(self.grid, comps)
    }

    /// One-axis Gaussian weights `exp(−(x_j − x_i)²/(4t))` between cell centres.
    fn axis_kernel(&self, t: f64) -> Vec<f64> {
        let c = self.cells_per_axis;
        let mut k = vec![0.0; c * c];
        for j in 0..c {
            for i in 0..c {
                let d = self.grid.min_image(self.axis_center[j] - self.axis_center[i]);
                k[j * c + i] = (-d * d / (4.0 * t)).exp();
            }
        }
        k
    }

    /// Applies a separable cell-to-cell kernel along every lattice axis.
    fn separable_apply(&self, kernel: &[f64], data: &mut Vec<f64>) {
        let c = self.cells_per_axis;
        let d = self.grid.dim();
        for axis in 0..d {
            let stride = c.pow((d - 1 - axis) as u32);
            let block = c * stride;
            let mut out = vec![0.0; data.len()];
            for base_block in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let base = base_block + off;
                    for j in 0..c {
                        let mut s = 0.0;
                        for i in 0..c {
                            s += kernel[j * c + i] * data[base + i * stride];
                        }
                        out[base + j * stride] = s;
                    }
                }
            }
            *data = out;
        }
    }

    /// `I_{h,t} f(x) = Σ_i t^{−d/2} e^{−|x_j − x_i|²/(4t)} ∫_{Q_i} f` for `x ∈ Q_j`.
    pub fn interpolant_iht(&self, f: &PhysicalField, t: f64) -> Result<PhysicalField> {
        self.check(f)?;
        if !(t > 0.0) {
            return Err(Error::param(format!("I_h,t needs t > 0, got {t}")));
        }
        let kernel = self.axis_kernel(t);
        let dv = self.grid.cell_volume();
        let pref = t.powf(-(self.grid.dim() as f64) / 2.0);
        let comps = f
            .components()
            .par_iter()
            .map(|c| {
                let mut integrals: Vec<f64> =
                    self.cell_sums(c).into_iter().map(|s| s * dv).collect();
                self.separable_apply(&kernel, &mut integrals);
                let scaled: Vec<f64> = integrals.into_iter().map(|v| v * pref).collect();
                self.broadcast(&scaled)
            })
            .collect();
        PhysicalField::new(self.grid, comps)
    }

    /// Gaussian tail sum `Σ_i (h^d/t^{d/2}) e^{−|x_i|²/(4t)}` over cell centres
    /// measured from cell 0.
    pub fn gaussian_tail_sum(&self, t: f64) -> f64 {
        let origin = self.cell_center(0);
        let d = self.grid.dim();
        (0..self.cell_count())
            .map(|cell| {
                let x = self.cell_center(cell);
                let r2: f64 = (0..d)
                    .map(|a| self.grid.min_image(x[a] - origin[a]).powi(2))
                    .sum();
                self.cell_volume(cell) / t.powf(d as f64 / 2.0) * (-r2 / (4.0 * t)).exp()
            })
            .sum()
    }

    /// `‖f − J_h f‖₂ / (h ‖∇f‖₂)`.
    pub fn poincare_check(&self, f: &SpectralField) -> Result<RatioReport> {
        let phys = f.to_physical();
        self.check(&phys)?;
        let grad = f.gradient_l2_sq().sqrt();
        let scale = f.l2_norm_sq().sqrt().max(f64::MIN_POSITIVE);
        if grad <= 1e-12 * scale {
            return Ok(RatioReport::vacuous());
        }
        let resid = phys.sub(&self.interpolant_jh(&phys)?)?;
        Ok(RatioReport::of(norm(&resid, 2.0)?, self.h() * grad))
    }
}

/// Measured physical sparseness of a field at probe radius `ell`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsenessCertificate {
    /// Volume-fraction bound being certified.
    pub epsilon: f64,
    pub beta: f64,
    pub ell: f64,
    pub p: f64,
    /// Threshold `λ*` defining `S = {|f| ≥ λ*}`.
    pub threshold: f64,
    pub set_points: usize,
    /// `sup_{x₀} |S ∩ B_ℓ(x₀)| / |B_ℓ(x₀)|` over grid centres.
    pub set_volume_fraction_max: f64,
    /// `‖f‖_{L^p(S^c)} / ‖f‖_p`.
    pub complement_norm_ratio: f64,
}

impl SparsenessCertificate {
    pub fn is_valid(&self) -> bool {
        self.complement_norm_ratio < self.beta && self.set_volume_fraction_max <= self.epsilon
    }

    /// Re-targets the certificate at a different volume-fraction bound.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// Minimal-image ball indicator of radius `ell` around the origin.
fn ball_stencil(grid: &GridSpec, ell: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            if grid.distance_to_origin(i) <= ell {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Builds the super-level set certificate for `(β, ℓ)`.
///
/// `S = {|f| ≥ λ*}` with `λ*` the largest threshold such that
/// `‖f‖_{L^p(S^c)} < β‖f‖_p`. The certificate's `epsilon` is set to the
/// measured volume fraction; use [`SparsenessCertificate::with_epsilon`] to
/// test against a prescribed bound.
pub fn physical_sparseness(
    f: &PhysicalField,
    p: f64,
    beta: f64,
    ell: f64,
) -> Result<SparsenessCertificate> {
    let grid = *f.grid();
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(format!("β must lie in (0,1), got {beta}")));
    }
    if !(ell > 0.0) || ell >= 0.5 * grid.period() {
        return Err(Error::Precondition(format!(
            "probe radius {ell} must be positive and below half the box"
        )));
    }
    let mag = f.magnitude();
    let total = norm(f, p)?;
    if total == 0.0 {
        return Err(Error::Precondition("sparseness of the zero field is undefined".into()));
    }
    let mut order: Vec<usize> = (0..mag.len()).collect();
    order.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| mag[i]).collect();
    let len = sorted.len();

    // complement(k): norm over sorted[k..] relative to the total.
    let complement_ratios: Vec<f64> = if p.is_infinite() {
        (0..=len)
            .map(|k| if k < len { sorted[k] / total } else { 0.0 })
            .collect()
    } else {
        let top = sorted[0];
        let dv = grid.cell_volume();
        let mut tail = vec![0.0; len + 1];
        for k in (0..len).rev() {
            tail[k] = tail[k + 1] + (sorted[k] / top).powf(p);
        }
        tail.iter()
            .map(|s| top * (s * dv).powf(1.0 / p) / total)
            .collect()
    };
    // Smallest k (largest threshold) meeting the bound, extended over ties.
    let mut k = (0..=len)
        .find(|&k| complement_ratios[k] < beta)
        .unwrap_or(len);
    while k > 0 && k < len && sorted[k] == sorted[k - 1] {
        k += 1;
    }
    let threshold = if k == 0 { f64::INFINITY } else { sorted[k - 1] };
    let mut indicator = vec![0.0; len];
    for &i in &order[..k] {
        indicator[i] = 1.0;
    }

    let stencil = ball_stencil(&grid, ell);
    let ball_points: f64 = stencil.iter().sum();
    let a = fft::forward_real(&grid, &indicator);
    let b = fft::forward_real(&grid, &stencil);
    let n_total = grid.len() as f64;
    let prod: Vec<_> = a.iter().zip(&b).map(|(x, y)| x * y * n_total).collect();
    let counts = fft::inverse_real(&grid, &prod);
    let max_count = counts.iter().map(|c| c.round()).fold(0.0, f64::max);

    Ok(SparsenessCertificate {
        epsilon: max_count / ball_points,
        beta,
        ell,
        p,
        threshold,
        set_points: k,
        set_volume_fraction_max: max_count / ball_points,
        complement_norm_ratio: complement_ratios[k],
    })
}

/// Lattice edge `h = κ γ √t` used by the discrete decay lemma.
pub fn decay_edge(kappa: f64, gamma: f64, t: f64) -> f64 {
    kappa * gamma * t.sqrt()
}

/// If `‖J_h f‖_p ≤ (γ/2)‖f‖_p` with `h = κ γ √t`, asserts `‖e^{tΔ}f‖_p ≤ γ‖f‖_p`.
pub fn lemma_discrete_decay_verify(
    f: &SpectralField,
    gamma: f64,
    t: f64,
    p: f64,
    kappa: f64,
) -> Result<LemmaVerdict> {
    if !(gamma > 0.0 && gamma < 1.0) || !(t > 0.0) {
        return Err(Error::param(format!("need γ in (0,1), t > 0; got γ={gamma}, t={t}")));
    }
    let h = decay_edge(kappa, gamma, t);
    let lattice = match CubeLattice::new(f.grid(), h, false) {
        Ok(l) => l,
        Err(Error::Precondition(_)) => {
            return Ok(LemmaVerdict::skipped(Outcome::Inconclusive, gamma, h, p, t))
        }
        Err(e) => return Err(e),
    };
    let phys = f.to_physical();
    let full = norm(&phys, p)?;
    if full == 0.0 {
        return Err(Error::Precondition("decay lemma on the zero field".into()));
    }
    let jh = norm(&lattice.interpolant_jh(&phys)?, p)? / full;
    let mut v = decay_conclusion(f, gamma, t, p)?;
    v.hypothesis_value = jh;
    v.hypothesis_bound = gamma / 2.0;
    v.scale = lattice.h();
    if jh > gamma / 2.0 {
        v.outcome = Outcome::NotApplicable;
    }
    Ok(v)
}

/// Measure of the unit ball in `d` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!("dimension is validated by GridSpec"),
    }
}
