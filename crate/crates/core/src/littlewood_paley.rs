//! Dyadic Littlewood–Paley filter bank on the periodic grid.
//!
//! The radial low-pass profile `χ` equals 1 on `|ξ| ≤ 1/2`, vanishes for
//! `|ξ| ≥ 1` and uses the `exp(-1/x)` smooth step in between. Bands are
//! `φ_j(ξ) = χ(ξ/2^{j+1}) − χ(ξ/2^j)`, supported on `2^{j−1} ≤ |ξ| ≤ 2^{j+1}`,
//! with `ξ` the physical wavenumber. The low-pass `Δ_{<J}` is the multiplier
//! `χ(2^{−J}ξ)` for any real `J`, and keeps the mean (`k = 0`) mode.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{norm, SpectralField};
use crate::grid::GridSpec;
use crate::heat_flow::decay_conclusion;
use crate::verdict::{LemmaVerdict, Outcome};

/// Partition-of-unity tolerance certified at construction.
pub const PARTITION_TOL: f64 = 1e-12;

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Radial low-pass profile.
pub fn chi(r: f64) -> f64 {
    1.0 - smooth_step(2.0 * r - 1.0)
}

/// Band profile `φ_j` at radius `r`.
pub fn phi(j: i32, r: f64) -> f64 {
    chi(r / 2f64.powi(j + 1)) - chi(r / 2f64.powi(j))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BandSelector {
    /// Single homogeneous block `Δ̇_j`.
    Eq { j: i32 },
    /// `Δ_{<J}`, multiplier `χ(2^{−J}ξ)`.
    Below { j: f64 },
    /// `Δ_{≥J} = 1 − Δ_{<J}`.
    AtOrAbove { j: f64 },
    /// `Σ_{lo ≤ j ≤ hi} Δ̇_j`.
    Range { lo: i32, hi: i32 },
}

impl BandSelector {
    pub fn eq(j: i32) -> Self {
        Self::Eq { j }
    }
    pub fn below(j: f64) -> Self {
        Self::Below { j }
    }
    pub fn at_or_above(j: f64) -> Self {
        Self::AtOrAbove { j }
    }
    /// `Δ_{≤J}` for integer `J`.
    pub fn at_most(j: i32) -> Self {
        Self::Below { j: (j + 1) as f64 }
    }
    /// `Δ_{>J}` for integer `J`.
    pub fn above(j: i32) -> Self {
        Self::AtOrAbove { j: (j + 1) as f64 }
    }
    pub fn range(lo: i32, hi: i32) -> Self {
        Self::Range { lo, hi }
    }
}

#[derive(Clone, Debug)]
pub struct BandSystem {
    grid: GridSpec,
    /// Lowest band touching a nonzero grid wavenumber.
    j_lo: i32,
    /// Band after which the partition is complete on the grid.
    j_top: i32,
    /// Highest band fully inside the Nyquist cube.
    j_max: i32,
    filters: Vec<Vec<f64>>,
    chi_profile: Vec<f64>,
    partition_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub s: f64,
    pub p: f64,
    pub value: f64,
    pub achieving_j: i32,
    pub homogeneous: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub j: i32,
    /// `‖∇Δ_j f‖_p / (2^j ‖Δ_j f‖_p)`.
    pub gradient_ratio: f64,
    /// `‖Δ_j f‖_p / (2^{j(d/q − d/p)} ‖Δ_j f‖_q)`.
    pub integrability_ratio: f64,
    pub vacuous: bool,
}

impl BandSystem {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        let k0 = grid.k0();
        let k_nyq = grid.k_nyquist();
        let k_corner = k_nyq * (grid.dim() as f64).sqrt();
        let j_lo = k0.log2().floor() as i32;
        let j_top = k_corner.log2().ceil() as i32;
        let j_max = k_nyq.log2().floor() as i32 - 1;
        let bands = j_max - j_lo + 1;
        if bands < 4 {
            return Err(Error::Precondition(format!(
                "grid resolves only {bands} dyadic bands (need >= 4); refine n"
            )));
        }
        let wn = grid.wavenumbers();
        let filters: Vec<Vec<f64>> = (j_lo..=j_top)
            .map(|j| wn.k_mag.iter().map(|&r| phi(j, r)).collect())
            .collect();
        let chi_profile: Vec<f64> = wn.k_mag.iter().map(|&r| chi(r)).collect();

        let mut residual: f64 = 0.0;
        for idx in 0..grid.len() {
            // Homogeneous: zero mode indicator plus all bands.
            let mut hom = if idx == 0 { 1.0 } else { 0.0 };
            // Inhomogeneous: χ plus bands j >= 0.
            let mut inh = chi_profile[idx];
            for (b, j) in (j_lo..=j_top).enumerate() {
                hom += filters[b][idx];
                if j >= 0 {
                    inh += filters[b][idx];
                }
            }
            residual = residual.max((hom - 1.0).abs()).max((inh - 1.0).abs());
        }
        if residual > PARTITION_TOL {
            return Err(Error::Precondition(format!(
                "partition of unity residual {residual:e} exceeds tolerance"
            )));
        }
        Ok(Self {
            grid: *grid,
            j_lo,
            j_top,
            j_max,
            filters,
            chi_profile,
            partition_residual: residual,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Bands fully resolved on the grid, `j_min..=j_max`.
    pub fn band_range(&self) -> (i32, i32) {
        (self.j_lo, self.j_max)
    }

    /// All bands carrying grid wavenumbers.
    pub fn partition_range(&self) -> (i32, i32) {
        (self.j_lo, self.j_top)
    }

    pub fn partition_residual(&self) -> f64 {
        self.partition_residual
    }

    pub fn chi_profile(&self) -> &[f64] {
        &self.chi_profile
    }

    /// Multiplier table `φ_j`, if `j` carries grid wavenumbers.
    pub fn filter(&self, j: i32) -> Option<&[f64]> {
        if j < self.j_lo || j > self.j_top {
            None
        } else {
            Some(&self.filters[(j - self.j_lo) as usize])
        }
    }

    fn clamp_cut(&self, j: f64) -> f64 {
        let lo = self.j_lo as f64;
        let hi = (self.j_top + 1) as f64;
        if j < lo || j > hi {
            warn!("band cut J = {j} outside [{lo}, {hi}]; clamped");
            j.clamp(lo, hi)
        } else {
            j
        }
    }

    /// Multiplier of a selector at flat index `idx`.
    pub fn multiplier(&self, selector: BandSelector) -> Vec<f64> {
        let wn = self.grid.wavenumbers();
        match selector {
            BandSelector::Eq { j } => match self.filter(j) {
                Some(f) => f.to_vec(),
                None => {
                    warn!("band j = {j} carries no grid wavenumbers; projection is zero");
                    vec![0.0; self.grid.len()]
                }
            },
            BandSelector::Below { j } => {
                let s = 2f64.powf(-self.clamp_cut(j));
                wn.k_mag.iter().map(|&r| chi(r * s)).collect()
            }
            BandSelector::AtOrAbove { j } => {
                let s = 2f64.powf(-self.clamp_cut(j));
                wn.k_mag.iter().map(|&r| 1.0 - chi(r * s)).collect()
            }
            BandSelector::Range { lo, hi } => {
                if hi < lo {
                    return vec![0.0; self.grid.len()];
                }
                let lo_c = self.clamp_cut(lo as f64);
                let hi_c = self.clamp_cut((hi + 1) as f64);
                let a = 2f64.powf(-hi_c);
                let b = 2f64.powf(-lo_c);
                wn.k_mag
                    .iter()
                    .map(|&r| if r == 0.0 { 0.0 } else { chi(r * a) - chi(r * b) })
                    .collect()
            }
        }
    }

    pub fn project(&self, f: &SpectralField, selector: BandSelector) -> Result<SpectralField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let m = self.multiplier(selector);
        Ok(f.apply_multiplier(|idx| m[idx]))
    }

    /// Sup over resolved bands of `2^{js}‖Δ_j f‖_p`.
    pub fn besov_norm(
        &self,
        f: &SpectralField,
        s: f64,
        p: f64,
        homogeneous: bool,
    ) -> Result<BesovReport> {
        let mut best = (0.0, self.j_lo);
        let mut first = true;
        let mut consider = |j: i32, v: f64| {
            if first || v > best.0 {
                best = (v, j);
                first = false;
            }
        };
        if homogeneous {
            let g = f.without_mean();
            for j in self.j_lo..=self.j_max {
                let b = self.project(&g, BandSelector::eq(j))?;
                consider(j, 2f64.powf(j as f64 * s) * norm(&b.to_physical(), p)?);
            }
        } else {
            let low = self.project(f, BandSelector::below(0.0))?;
            consider(-1, 0.5f64.powf(s) * norm(&low.to_physical(), p)?);
            for j in 0.max(self.j_lo)..=self.j_max {
                let b = self.project(f, BandSelector::eq(j))?;
                consider(j, 2f64.powf(j as f64 * s) * norm(&b.to_physical(), p)?);
            }
        }
        Ok(BesovReport {
            s,
            p,
            value: best.0,
            achieving_j: best.1,
            homogeneous,
        })
    }

    pub fn bernstein_check(
        &self,
        f: &SpectralField,
        j: i32,
        p: f64,
        q: f64,
    ) -> Result<BernsteinReport> {
        if q > p {
            return Err(Error::param(format!("Bernstein check needs q <= p (q={q}, p={p})")));
        }
        let block = self.project(f, BandSelector::eq(j))?;
        let phys = block.to_physical();
        let np = norm(&phys, p)?;
        let full = norm(&f.to_physical(), p)?;
        if np <= 1e-12 * full.max(f64::MIN_POSITIVE) || np == 0.0 {
            return Ok(BernsteinReport {
                j,
                gradient_ratio: 0.0,
                integrability_ratio: 0.0,
                vacuous: true,
            });
        }
        let lam = 2f64.powi(j);
        let grad = norm(&block.gradient().to_physical(), p)?;
        let nq = norm(&phys, q)?;
        let d = self.grid.dim() as f64;
        let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
        let scale = lam.powf(d * inv(q) - d * inv(p));
        Ok(BernsteinReport {
            j,
            gradient_ratio: grad / (lam * np),
            integrability_ratio: np / (scale * nq),
            vacuous: false,
        })
    }

    /// `‖Δ_{<J} f‖_p / ‖f‖_p`.
    pub fn frequency_sparseness(&self, f: &SpectralField, p: f64, j: f64) -> Result<f64> {
        let full = norm(&f.to_physical(), p)?;
        if full == 0.0 {
            return Err(Error::Precondition(
                "frequency sparseness of the zero field is undefined".into(),
            ));
        }
        let low = self.project(f, BandSelector::below(j))?;
        Ok(norm(&low.to_physical(), p)? / full)
    }

    /// Frequency cut `J = ⌈log₂(κ γ⁻¹ t^{−1/2})⌉` used by the decay lemma.
    pub fn decay_cut(kappa: f64, gamma: f64, t: f64) -> i32 {
        (kappa / (gamma * t.sqrt())).log2().ceil() as i32
    }

    /// Conditional heat decay under frequency sparseness.
    ///
    /// If `‖Δ_{<J}f‖_p ≤ (γ/2)‖f‖_p` then `‖e^{tΔ}f‖_p ≤ γ‖f‖_p` is asserted.
    pub fn frequency_decay_verify(
        &self,
        f: &SpectralField,
        gamma: f64,
        t: f64,
        p: f64,
        kappa: f64,
    ) -> Result<LemmaVerdict> {
        if !(gamma > 0.0 && gamma < 1.0) || !(t > 0.0) {
            return Err(Error::param(format!("need γ in (0,1), t > 0; got γ={gamma}, t={t}")));
        }
        let cut = Self::decay_cut(kappa, gamma, t);
        if cut < self.j_lo || cut > self.j_top + 1 {
            return Ok(LemmaVerdict::skipped(
                Outcome::Inconclusive,
                gamma,
                cut as f64,
                p,
                t,
            ));
        }
        let beta = self.frequency_sparseness(f, p, cut as f64)?;
        let mut v = decay_conclusion(f, gamma, t, p)?;
        v.hypothesis_value = beta;
        v.hypothesis_bound = gamma / 2.0;
        v.scale = cut as f64;
        if beta > gamma / 2.0 {
            v.outcome = Outcome::NotApplicable;
        }
        Ok(v)
    }
}

pub fn build_band_system(grid: &GridSpec) -> Result<BandSystem> {
    BandSystem::new(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PhysicalField;
    use crate::random;

    fn grid(n: usize) -> GridSpec {
        GridSpec::periodic(2, n, 0.1).unwrap()
    }

    #[test]
    fn profile_support_properties() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(1.0), 0.0);
        assert!(chi(0.75) > 0.0 && chi(0.75) < 1.0);
        // Inside B_{1/2}: χ = 1 and every φ_j with j >= 0 vanishes.
        for j in 0..6 {
            assert_eq!(phi(j, 0.3), 0.0);
        }
        // At |ξ| = 2^j only φ_{j-1}, φ_j, φ_{j+1} can be nonzero.
        for j in 0..5 {
            let r = 2f64.powi(j);
            for i in -3..9 {
                if (i - j).abs() > 1 {
                    assert_eq!(phi(i, r), 0.0, "phi_{i}(2^{j})");
                }
            }
            assert_eq!(phi(j, r), 1.0);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(BandSystem::new(&grid(16)).is_err());
        assert!(BandSystem::new(&grid(32)).is_ok());
    }

    #[test]
    fn n64_band_range_and_partition() {
        let bs = BandSystem::new(&grid(64)).unwrap();
        assert_eq!(bs.band_range(), (0, 4));
        assert!(bs.partition_residual() <= 1e-12);
        // Independent direct summation over every wavenumber.
        let wn = bs.grid().wavenumbers();
        let (lo, hi) = bs.partition_range();
        for idx in 0..bs.grid().len() {
            let r = wn.k_mag[idx];
            let s: f64 = chi(r) + (0..=hi).map(|j| phi(j, r)).sum::<f64>();
            assert!((s - 1.0).abs() <= 1e-12);
            let h: f64 = (lo..=hi).map(|j| phi(j, r)).sum::<f64>() + if idx == 0 { 1.0 } else { 0.0 };
            assert!((h - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn low_pass_removes_disjoint_mode() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        let f = PhysicalField::vector_from_fn(g, |x| [0.0, (8.0 * x[0]).sin(), 0.0])
            .to_spectral()
            .unwrap();
        let low = bs.project(&f, BandSelector::below(1.0)).unwrap();
        assert!(low.to_physical().max_magnitude() <= 1e-14);
    }

    #[test]
    fn complementary_selectors_sum_to_identity() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        let f = random::band_limited(&g, 2, 0.0, 30.0, &mut random::rng(5)).unwrap();
        for j in [-0.5, 1.0, 2.7, 4.0] {
            let a = bs.project(&f, BandSelector::below(j)).unwrap();
            let b = bs.project(&f, BandSelector::at_or_above(j)).unwrap();
            let d = a.add(&b).unwrap().sub(&f).unwrap();
            let err = d
                .components()
                .iter()
                .flat_map(|c| c.iter())
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-12, "J={j}: {err}");
        }
    }

    #[test]
    fn band_norm_matches_direct_multiplier() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        // Flat spectrum: unit coefficient on every nonzero non-Nyquist mode.
        let wn = g.wavenumbers();
        let half = (g.n() / 2) as i64;
        let comp: Vec<num_complex::Complex64> = (0..g.len())
            .map(|i| {
                if i == 0 || wn.modes[i].iter().any(|&m| m == -half) {
                    0.0.into()
                } else {
                    1.0.into()
                }
            })
            .collect();
        let f = SpectralField::new(g, vec![comp]).unwrap();
        for j in 0..=4 {
            let got = bs.project(&f, BandSelector::eq(j)).unwrap().l2_norm_sq();
            // Direct: Σ φ_j(|k|)² over the same modes times the volume.
            let direct: f64 = (0..g.len())
                .filter(|&i| i != 0 && !wn.modes[i].iter().any(|&m| m == -half))
                .map(|i| phi(j, wn.k_mag[i]).powi(2))
                .sum::<f64>()
                * g.volume();
            assert!((got - direct).abs() <= 1e-10 * direct, "j={j}");
        }
    }

    #[test]
    fn besov_examples() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        for j in 1..=4 {
            let k = 2f64.powi(j);
            let f = PhysicalField::vector_from_fn(g, move |x| [0.0, (k * x[0]).sin(), 0.0])
                .to_spectral()
                .unwrap();
            let r = bs.besov_norm(&f, -1.0, f64::INFINITY, true).unwrap();
            assert!((r.value - 1.0 / k).abs() < 1e-12, "j={j}: {}", r.value);
            assert_eq!(r.achieving_j, j);
        }
        let z = SpectralField::zeros(g, 2);
        assert_eq!(bs.besov_norm(&z, -1.0, f64::INFINITY, true).unwrap().value, 0.0);

        // ‖Δ_j f‖_∞ = 2^{4j} per band by amplitude assignment.
        let f = PhysicalField::vector_from_fn(g, |x| {
            let mut s = 0.0;
            for j in 0..=4 {
                s += 16f64.powi(j) * (2f64.powi(j) * x[1]).sin();
            }
            [s, 0.0, 0.0]
        })
        .to_spectral()
        .unwrap();
        for j in 0..=4 {
            let b = bs.project(&f, BandSelector::eq(j)).unwrap().to_physical();
            let v = norm(&b, f64::INFINITY).unwrap();
            assert!((v / 16f64.powi(j) - 1.0).abs() < 1e-9);
        }
        let r = bs.besov_norm(&f, -4.0, f64::INFINITY, true).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inhomogeneous_norm_includes_low_block() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        let f = PhysicalField::constant(g, &[1.0, 0.0]).to_spectral().unwrap();
        let r = bs.besov_norm(&f, 1.0, f64::INFINITY, false).unwrap();
        assert_eq!(r.achieving_j, -1);
        assert!((r.value - 0.5).abs() < 1e-12);
        assert_eq!(bs.besov_norm(&f, 1.0, f64::INFINITY, true).unwrap().value, 0.0);
    }

    #[test]
    fn bernstein_pure_mode_and_constant() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        for (j, k) in [(2, 4.0), (2, 5.0), (3, 6.0), (3, 11.0)] {
            let f = PhysicalField::vector_from_fn(g, move |x| [0.0, (k * x[0]).cos(), 0.0])
                .to_spectral()
                .unwrap();
            let r = bs.bernstein_check(&f, j, f64::INFINITY, 2.0).unwrap();
            let expect = k / 2f64.powi(j);
            assert!((r.gradient_ratio - expect).abs() < 1e-9);
            assert!((0.5..=2.0).contains(&r.gradient_ratio));
        }
        let c = PhysicalField::constant(g, &[1.0, 1.0]).to_spectral().unwrap();
        assert!(bs.bernstein_check(&c, 2, 2.0, 2.0).unwrap().vacuous);
        assert!(bs.bernstein_check(&c, 2, 2.0, 4.0).is_err());
    }

    #[test]
    fn frequency_sparseness_examples() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        let mode = |k: f64| {
            PhysicalField::vector_from_fn(g, move |x| [0.0, (k * x[0]).sin(), 0.0])
                .to_spectral()
                .unwrap()
        };
        // |k| = 2^{J+2}
        assert!(bs.frequency_sparseness(&mode(16.0), 2.0, 2.0).unwrap() <= 1e-12);
        assert!((bs.frequency_sparseness(&mode(1.0), 2.0, 3.0).unwrap() - 1.0).abs() < 1e-12);
        let mix = mode(1.0).scale(0.1).add(&mode(16.0)).unwrap();
        let beta = bs.frequency_sparseness(&mix, 2.0, 2.0).unwrap();
        assert!((beta - 0.1 / 1.01f64.sqrt()).abs() < 1e-10, "{beta}");
        assert!((beta - 0.0995).abs() < 1e-4);
        assert!(bs
            .frequency_sparseness(&SpectralField::zeros(g, 2), 2.0, 2.0)
            .is_err());
    }

    #[test]
    fn frequency_decay_lemma_single_mode_and_low_field() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        let (gamma, t, kappa) = (0.2, 0.2, 1.0);
        let cut = BandSystem::decay_cut(kappa, gamma, t);
        let k = 2f64.powi(cut);
        let f = PhysicalField::vector_from_fn(g, move |x| [0.0, (k * x[0]).sin(), 0.0])
            .to_spectral()
            .unwrap();
        let v = bs.frequency_decay_verify(&f, gamma, t, 2.0, kappa).unwrap();
        assert_eq!(v.outcome, Outcome::Pass);
        assert!((v.decay_ratio - (-k * k * t).exp()).abs() < 1e-12);

        let low = PhysicalField::vector_from_fn(g, |x| [0.0, x[0].sin(), 0.0])
            .to_spectral()
            .unwrap();
        let v = bs.frequency_decay_verify(&low, gamma, t, 2.0, kappa).unwrap();
        assert_eq!(v.outcome, Outcome::NotApplicable);
        assert!((v.hypothesis_value - 1.0).abs() < 1e-12);

        // Cut far outside the grid.
        let v = bs.frequency_decay_verify(&f, 0.01, 1e-6, 2.0, kappa).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn distant_bands_are_orthogonal() {
        let g = grid(64);
        let bs = BandSystem::new(&g).unwrap();
        let f = random::band_limited(&g, 2, 0.0, 30.0, &mut random::rng(9)).unwrap();
        for i in 0..=4 {
            for j in (i + 2)..=5 {
                let a = bs.project(&f, BandSelector::eq(i)).unwrap();
                let b = bs.project(&f, BandSelector::eq(j)).unwrap();
                assert!(a.inner(&b).unwrap().abs() < 1e-10);
            }
        }
    }
}
