//! Seeded generators for the test and calibration corpora.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::field::{PhysicalField, SpectralField};
use crate::grid::GridSpec;

pub type CorpusRng = ChaCha8Rng;

pub fn rng(seed: u64) -> CorpusRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real field with Gaussian coefficients on the shell `k_lo <= |k| <= k_hi`.
///
/// Coefficients are drawn independently, then Hermitian-symmetrised by
/// keeping the real part in physical space. Nyquist modes are left empty.
pub fn band_limited(
    grid: &GridSpec,
    ncomp: usize,
    k_lo: f64,
    k_hi: f64,
    rng: &mut CorpusRng,
) -> Result<SpectralField> {
    let wn = grid.wavenumbers();
    let half = (grid.n() / 2) as i64;
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; ncomp];
    for idx in 0..grid.len() {
        let km = wn.k_mag[idx];
        let nyq = wn.modes[idx].iter().any(|&m| m == -half);
        if nyq || km < k_lo || km > k_hi {
            continue;
        }
        for c in comps.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c[idx] = Complex64::new(re, im);
        }
    }
    let raw = SpectralField::new(*grid, comps)?;
    raw.to_physical().to_spectral()
}

/// Divergence-free band-limited vector field scaled to unit L² norm.
pub fn divergence_free(
    grid: &GridSpec,
    k_lo: f64,
    k_hi: f64,
    rng: &mut CorpusRng,
) -> Result<SpectralField> {
    let f = band_limited(grid, grid.dim(), k_lo, k_hi, rng)?.leray_project()?;
    let norm = f.l2_norm_sq().sqrt();
    Ok(if norm > 0.0 { f.scale(1.0 / norm) } else { f })
}

/// Random smooth field with a decaying spectrum `|k|^{-slope}` up to `k_hi`.
pub fn smooth_spectrum(
    grid: &GridSpec,
    ncomp: usize,
    k_hi: f64,
    slope: f64,
    rng: &mut CorpusRng,
) -> Result<SpectralField> {
    let base = band_limited(grid, ncomp, grid.k0() * 0.5, k_hi, rng)?;
    let wn = grid.wavenumbers();
    Ok(base.apply_multiplier(|idx| {
        let k = wn.k_mag[idx];
        if k == 0.0 {
            0.0
        } else {
            k.powf(-slope)
        }
    }))
}

/// Periodised distance components from `center` (minimal image).
fn displacement(grid: &GridSpec, x: [f64; 3], center: [f64; 3]) -> f64 {
    (0..grid.dim())
        .map(|a| grid.min_image(x[a] - center[a]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Gaussian bump `amp * exp(-r²/(2σ²))` in every component direction `dir`.
pub fn gaussian_bump(grid: &GridSpec, center: [f64; 3], sigma: f64, dir: [f64; 3]) -> PhysicalField {
    let g = *grid;
    PhysicalField::vector_from_fn(g, move |x| {
        let r = displacement(&g, x, center);
        let e = (-r * r / (2.0 * sigma * sigma)).exp();
        [dir[0] * e, dir[1] * e, dir[2] * e]
    })
}

/// C^∞ bump `exp(1 - 1/(1 - (r/R)²))` supported in the ball of radius `R`.
pub fn compact_bump(grid: &GridSpec, center: [f64; 3], radius: f64, dir: [f64; 3]) -> PhysicalField {
    let g = *grid;
    PhysicalField::vector_from_fn(g, move |x| {
        let r = displacement(&g, x, center) / radius;
        let e = if r < 1.0 {
            (1.0 - 1.0 / (1.0 - r * r)).exp()
        } else {
            0.0
        };
        [dir[0] * e, dir[1] * e, dir[2] * e]
    })
}

pub fn random_direction(dim: usize, rng: &mut CorpusRng) -> [f64; 3] {
    let mut v = [0.0; 3];
    loop {
        for x in v.iter_mut().take(dim) {
            *x = rng.sample(StandardNormal);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Sum of `count` Gaussian bumps centred inside a ball of radius `spread`
/// about the box centre.
pub fn bump_cluster(
    grid: &GridSpec,
    count: usize,
    sigma_range: (f64, f64),
    spread: f64,
    rng: &mut CorpusRng,
) -> PhysicalField {
    let mid = 0.5 * grid.period();
    let mut acc = PhysicalField::zeros(*grid, grid.dim());
    for _ in 0..count {
        let mut center = [0.0; 3];
        for c in center.iter_mut().take(grid.dim()) {
            *c = mid + spread * (2.0 * rng.random::<f64>() - 1.0);
        }
        let sigma = rng.random_range(sigma_range.0..=sigma_range.1);
        let amp = rng.random_range(0.5..1.5);
        let mut dir = random_direction(grid.dim(), rng);
        dir.iter_mut().for_each(|d| *d *= amp);
        acc = acc
            .add(&gaussian_bump(grid, center, sigma, dir))
            .expect("same grid");
    }
    acc
}

/// Taylor–Green vortex `(sin x₁ cos x₂, −cos x₁ sin x₂[, 0])` scaled to the box.
pub fn taylor_green(grid: &GridSpec) -> Result<SpectralField> {
    let k = 2.0 * PI / grid.period();
    PhysicalField::vector_from_fn(*grid, |x| {
        [
            (k * x[0]).sin() * (k * x[1]).cos(),
            -(k * x[0]).cos() * (k * x[1]).sin(),
            0.0,
        ]
    })
    .to_spectral()?
    .leray_project()
}
