//! Heat semigroup, its physical-space oracle, and the physical sparseness
//! decay lemma.
//!
//! The kernel is `G_t(x) = (4πt)^{−d/2} e^{−|x|²/(4t)}`, so `‖G_t‖₁ = 1` and
//! `‖G‖_∞ = (4π)^{−d/2}` for the unit-time profile.

mod duhamel;
mod tsai;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{norm, PhysicalField, SpectralField};
use crate::grid::GridSpec;
use crate::lattice_scales::{physical_sparseness, SparsenessCertificate};
use crate::verdict::{LemmaVerdict, Outcome};

pub use duhamel::{bilinear_estimate_check, bilinear_exponent, duhamel_bilinear, BilinearReport};
pub use tsai::{tsai_bound, tsai_phi, TsaiReport};

/// `e^{ν t Δ} f` by the exact spectral multiplier `e^{−ν|k|²t}`.
pub fn heat_evolve(f: &SpectralField, t: f64, nu_eff: f64) -> SpectralField {
    debug_assert!(t >= 0.0 && nu_eff > 0.0);
    if t == 0.0 {
        return f.clone();
    }
    let wn = f.grid().wavenumbers();
    let s = nu_eff * t;
    f.apply_multiplier(|idx| (-wn.k_sq[idx] * s).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatPath {
    SpectralMultiplier,
    GaussianConvolution,
}

/// Unit-viscosity heat evolution by a chosen implementation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatSchedule {
    pub t: f64,
    pub path: HeatPath,
}

impl HeatSchedule {
    pub fn apply(&self, f: &PhysicalField) -> Result<PhysicalField> {
        match self.path {
            HeatPath::SpectralMultiplier => Ok(heat_evolve(&f.to_spectral()?, self.t, 1.0).to_physical()),
            HeatPath::GaussianConvolution => gaussian_convolve_oracle(f, self.t),
        }
    }
}

/// Largest admissible `√t` for the convolution oracle, as a box fraction.
pub const ORACLE_MAX_ROOT_T_FRACTION: f64 = 1.0 / 16.0;

/// Per-axis periodised Gaussian weights `Δx (4πt)^{−1/2} Σ_m e^{−(x + mL)²/(4t)}`.
fn axis_weights(grid: &GridSpec, t: f64) -> Vec<f64> {
    let n = grid.n();
    let l = grid.period();
    let dx = grid.spacing();
    let pref = dx / (4.0 * PI * t).sqrt();
    (0..n)
        .map(|i| {
            let x = grid.min_image(i as f64 * dx);
            (-2..=2)
                .map(|m| {
                    let y = x + m as f64 * l;
                    (-y * y / (4.0 * t)).exp()
                })
                .sum::<f64>()
                * pref
        })
        .collect()
}

/// Direct physical-space convolution with the periodised heat kernel.
///
/// Rejects `√t > period/16`, reporting the single-image tail mass
/// `e^{−(L/2)²/(4t)}` that the whole-space comparison would then miss.
pub fn gaussian_convolve_oracle(f: &PhysicalField, t: f64) -> Result<PhysicalField> {
    let grid = *f.grid();
    if !(t >= 0.0) {
        return Err(Error::param(format!("heat time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let l = grid.period();
    if t.sqrt() > l * ORACLE_MAX_ROOT_T_FRACTION {
        let tail = (-(l / 2.0).powi(2) / (4.0 * t)).exp();
        return Err(Error::Precondition(format!(
            "√t = {:.4} exceeds period/16 = {:.4}; kernel tail mass beyond half the box ≈ {tail:.3e}",
            t.sqrt(),
            l / 16.0
        )));
    }
    let n = grid.n();
    let d = grid.dim();
    let w = axis_weights(&grid, t);
    let comps = f
        .components()
        .iter()
        .map(|c| {
            let mut data = c.clone();
            for axis in 0..d {
                let stride = n.pow((d - 1 - axis) as u32);
                let block = n * stride;
                let lines = data.len() / n;
                let src = &data;
                let out: Vec<Vec<f64>> = (0..lines)
                    .into_par_iter()
                    .map(|line| {
                        let base = (line / stride) * block + line % stride;
                        (0..n)
                            .map(|j| {
                                let mut s = 0.0;
                                for i in 0..n {
                                    s += w[(j + n - i) % n] * src[base + i * stride];
                                }
                                s
                            })
                            .collect()
                    })
                    .collect();
                let mut next = vec![0.0; data.len()];
                for (line, vals) in out.into_iter().enumerate() {
                    let base = (line / stride) * block + line % stride;
                    for (j, v) in vals.into_iter().enumerate() {
                        next[base + j * stride] = v;
                    }
                }
                data = next;
            }
            data
        })
        .collect();
    PhysicalField::new(grid, comps)
}

/// Evaluates `‖e^{tΔ}f‖_p / ‖f‖_p` against `γ` (pure heat, `ν = 1`).
pub(crate) fn decay_conclusion(
    f: &SpectralField,
    gamma: f64,
    t: f64,
    p: f64,
) -> Result<LemmaVerdict> {
    let full = norm(&f.to_physical(), p)?;
    let evolved = norm(&heat_evolve(f, t, 1.0).to_physical(), p)?;
    let ratio = if full > 0.0 { evolved / full } else { 0.0 };
    let margin = gamma - ratio;
    Ok(LemmaVerdict {
        outcome: if margin >= 0.0 {
            Outcome::Pass
        } else {
            Outcome::Fail
        },
        decay_ratio: ratio,
        gamma,
        margin,
        hypothesis_value: f64::NAN,
        hypothesis_bound: f64::NAN,
        scale: f64::NAN,
        p,
        t,
    })
}

/// Parameter schedule for the physical sparseness decay lemma, heat case:
/// `ℓ̄² = C0 ln(C0/γ)`, `β ≤ γ/3`, `ε^{1−1/p} ≤ C0⁻¹ (4π)^{d/2} γ / ℓ̄^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityDecaySchedule {
    pub gamma: f64,
    pub t: f64,
    pub p: f64,
    pub dim: usize,
    pub c0: f64,
    pub ell_bar: f64,
    pub beta_max: f64,
    pub epsilon_max: f64,
}

impl SparsityDecaySchedule {
    pub fn new(gamma: f64, t: f64, p: f64, dim: usize, c0: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(format!("γ must lie in (0,1), got {gamma}")));
        }
        if !(t > 0.0) {
            return Err(Error::param(format!("t must be positive, got {t}")));
        }
        if !(p > 1.0) {
            return Err(Error::param(format!("sparseness decay needs p in (1,∞], got {p}")));
        }
        if !(c0 > 1.0) {
            return Err(Error::param(format!("C0 must exceed 1, got {c0}")));
        }
        let ell_bar = (c0 * (c0 / gamma).ln()).sqrt();
        let g_inf = (4.0 * PI).powf(-(dim as f64) / 2.0);
        let rhs = gamma / (c0 * g_inf * ell_bar.powi(dim as i32));
        let expo = if p.is_infinite() { 1.0 } else { 1.0 - 1.0 / p };
        Ok(Self {
            gamma,
            t,
            p,
            dim,
            c0,
            ell_bar,
            beta_max: gamma / 3.0,
            epsilon_max: rhs.powf(1.0 / expo).min(1.0),
        })
    }

    /// Probe radius `ℓ̄√t`.
    pub fn probe_radius(&self) -> f64 {
        self.ell_bar * self.t.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaloricVerdict {
    pub verdict: LemmaVerdict,
    pub schedule: SparsityDecaySchedule,
    pub certificate: Option<SparsenessCertificate>,
}

/// If `f` is `(ε, β, ℓ̄√t)`-sparse under the schedule, asserts
/// `‖e^{tΔ}f‖_p ≤ γ‖f‖_p`.
pub fn caloric_sparse_decay_verify(
    f: &SpectralField,
    schedule: &SparsityDecaySchedule,
) -> Result<CaloricVerdict> {
    let s = *schedule;
    if s.dim != f.grid().dim() {
        return Err(Error::param("schedule dimension differs from the field's grid"));
    }
    let ell = s.probe_radius();
    if ell >= 0.5 * f.grid().period() {
        return Ok(CaloricVerdict {
            verdict: LemmaVerdict::skipped(Outcome::Inconclusive, s.gamma, ell, s.p, s.t),
            schedule: s,
            certificate: None,
        });
    }
    let cert = physical_sparseness(&f.to_physical(), s.p, s.beta_max, ell)?.with_epsilon(s.epsilon_max);
    let mut verdict = if cert.is_valid() {
        decay_conclusion(f, s.gamma, s.t, s.p)?
    } else {
        LemmaVerdict::skipped(Outcome::NotApplicable, s.gamma, ell, s.p, s.t)
    };
    verdict.hypothesis_value = cert.set_volume_fraction_max;
    verdict.hypothesis_bound = s.epsilon_max;
    verdict.scale = ell;
    Ok(CaloricVerdict {
        verdict,
        schedule: s,
        certificate: Some(cert),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use proptest::prelude::*;

    fn max_rel(a: &PhysicalField, b: &PhysicalField) -> f64 {
        a.sub(b).unwrap().max_magnitude() / b.max_magnitude().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn eigenfunction_decay_and_identity() {
        let g = GridSpec::periodic(2, 32, 0.1).unwrap();
        let f = PhysicalField::vector_from_fn(g, |x| [x[0].sin(), 0.0, 0.0]);
        let e = heat_evolve(&f.to_spectral().unwrap(), 0.5, 1.0).to_physical();
        assert!(((-0.5f64).exp() - 0.60653).abs() < 1e-5);
        assert!(max_rel(&e, &f.scale((-0.5f64).exp())) < 1e-13);
        let z = heat_evolve(&f.to_spectral().unwrap(), 0.0, 1.0).to_physical();
        assert!(max_rel(&z, &f) < 1e-14);
    }

    #[test]
    fn oracle_impulse_is_sampled_gaussian() {
        let g = GridSpec::new(2, 128, 8.0, 0.1).unwrap();
        let t = 0.05;
        let center = g.flat([64, 64, 0]);
        let mut comps = vec![vec![0.0; g.len()]];
        comps[0][center] = 1.0 / g.cell_volume();
        let f = PhysicalField::new(g, comps).unwrap();
        let out = gaussian_convolve_oracle(&f, t).unwrap();
        let c = g.position(center);
        for probe in [center, g.flat([66, 63, 0]), g.flat([70, 60, 0])] {
            let x = g.position(probe);
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            let want = (-r2 / (4.0 * t)).exp() / (4.0 * PI * t);
            assert!((out.component(0)[probe] - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn oracle_keeps_constants_and_rejects_long_times() {
        let g = GridSpec::new(2, 64, 8.0, 0.1).unwrap();
        let c = PhysicalField::constant(g, &[2.0, -1.0]);
        let out = gaussian_convolve_oracle(&c, 0.2).unwrap();
        assert!(max_rel(&out, &c) < 1e-10);
        let err = gaussian_convolve_oracle(&c, 0.3).unwrap_err().to_string();
        assert!(err.contains("tail mass"), "{err}");
    }

    #[test]
    fn dual_path_agreement_on_bumps() {
        let g = GridSpec::new(2, 128, 8.0, 0.1).unwrap();
        let mut rng = random::rng(17);
        for t in [0.01, 0.05, 0.2] {
            let f = random::bump_cluster(&g, 3, (0.3, 0.5), 0.5, &mut rng);
            let a = heat_evolve(&f.to_spectral().unwrap(), t, 1.0).to_physical();
            let b = gaussian_convolve_oracle(&f, t).unwrap();
            let rel = norm(&a.sub(&b).unwrap(), 2.0).unwrap() / norm(&b, 2.0).unwrap();
            assert!(rel < 1e-8, "t={t}: {rel}");
        }
    }

    #[test]
    fn schedule_formulas() {
        let s = SparsityDecaySchedule::new(0.2, 0.1, f64::INFINITY, 2, 2.0).unwrap();
        assert!((s.ell_bar.powi(2) - 2.0 * (10.0f64).ln()).abs() < 1e-12);
        assert!((s.beta_max - 0.2 / 3.0).abs() < 1e-15);
        let want = 0.2 * 4.0 * PI / (2.0 * s.ell_bar.powi(2));
        assert!((s.epsilon_max - want).abs() < 1e-12);
        assert!(SparsityDecaySchedule::new(0.2, 0.1, 1.0, 2, 2.0).is_err());
        assert!(SparsityDecaySchedule::new(0.2, 0.1, 2.0, 2, 0.5).is_err());
    }

    #[test]
    fn caloric_lemma_examples() {
        let g = GridSpec::periodic(2, 256, 0.1).unwrap();
        let s = SparsityDecaySchedule::new(0.2, 0.1, f64::INFINITY, 2, 2.0).unwrap();
        let sigma = s.probe_radius() / 20.0;
        let bump = random::gaussian_bump(&g, [PI, PI, 0.0], sigma, [1.0, 0.0, 0.0])
            .to_spectral()
            .unwrap();
        let v = caloric_sparse_decay_verify(&bump, &s).unwrap();
        assert!(v.certificate.as_ref().unwrap().is_valid());
        assert_eq!(v.verdict.outcome, Outcome::Pass);

        let c = PhysicalField::constant(g, &[1.0, 0.0]).to_spectral().unwrap();
        let v = caloric_sparse_decay_verify(&c, &s).unwrap();
        assert_eq!(v.verdict.outcome, Outcome::NotApplicable);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn semigroup_composition_and_contraction(seed in 0u64..10_000, s in 0.0f64..0.5, t in 0.0f64..0.5) {
            let g = GridSpec::periodic(2, 32, 0.1).unwrap();
            let f = random::band_limited(&g, 2, 0.0, 12.0, &mut random::rng(seed)).unwrap();
            let a = heat_evolve(&heat_evolve(&f, s, 1.0), t, 1.0);
            let b = heat_evolve(&f, s + t, 1.0);
            let scale = f.components().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
            let diff = a.sub(&b).unwrap().components().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-12 * scale);
            // Past t ≈ 0.2 the truncated discrete kernel is positive to roundoff.
            let c = heat_evolve(&f, s + t + 0.2, 1.0);
            for p in [2.0, f64::INFINITY] {
                let n0 = norm(&f.to_physical(), p).unwrap();
                let n1 = norm(&c.to_physical(), p).unwrap();
                prop_assert!(n1 <= n0 * (1.0 + 1e-12));
            }
        }
    }
}
