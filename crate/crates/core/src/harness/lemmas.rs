//! Corpora for the three conditional decay lemmas. Each field is built so that
//! its hypothesis sits just inside the admissible bound, which is where a
//! counterexample would show.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{case_seeds, SuiteReport};
use crate::error::Result;
use crate::field::{norm, PhysicalField};
use crate::grid::GridSpec;
use crate::heat_flow::{caloric_sparse_decay_verify, SparsityDecaySchedule};
use crate::lattice_scales::{decay_edge, lemma_discrete_decay_verify, CubeLattice};
use crate::littlewood_paley::{BandSelector, BandSystem};
use crate::random;
use crate::verdict::{LemmaVerdict, Outcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCorpusConfig {
    pub n: usize,
    /// Fields per `γ`; each is tested at every `p`.
    pub count: usize,
    pub gammas: Vec<f64>,
    pub ps: Vec<f64>,
    pub seed: u64,
    /// Hypothesis value as a fraction of its bound `γ/2`.
    pub target_fraction: f64,
}

impl DecayCorpusConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            n: 128,
            count: 100,
            gammas: vec![0.05, 0.1, 0.2],
            ps: vec![2.0, f64::INFINITY],
            seed,
            target_fraction: 0.9,
        }
    }
}

const BISECT_STEPS: usize = 60;
const SCALE_CAP: f64 = 1e6;

/// Largest `s ∈ [0, SCALE_CAP]` with `ratio(s) ≤ target`, for ratios that
/// increase with `s`; returns 0 when even `s = 0` exceeds the target.
fn bisect_scale(target: f64, ratio: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if ratio(0.0)? > target {
        return Ok(0.0);
    }
    if ratio(SCALE_CAP)? <= target {
        return Ok(SCALE_CAP);
    }
    let (mut lo, mut hi) = (0.0f64, SCALE_CAP);
    for _ in 0..BISECT_STEPS {
        let mid = if hi / lo.max(1e-12) > 4.0 { (lo.max(1e-12) * hi).sqrt() } else { 0.5 * (lo + hi) };
        if ratio(mid)? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn comb(a: &PhysicalField, b: &PhysicalField, s: f64) -> Result<PhysicalField> {
    a.add(&b.scale(s))
}

/// `t = (16/(nγ))²`, so `γ√t = 16/n` for every `γ` and the cut at `κ = 1`
/// sits at `2^J = n/16`, inside the corpus spectrum.
pub fn frequency_harness_time(n: usize, gamma: f64) -> f64 {
    (16.0 / (n as f64 * gamma)).powi(2)
}

/// Lemma: `‖Δ_{<J}f‖_p ≤ (γ/2)‖f‖_p` with `J = ⌈log₂(κ/(γ√t))⌉` implies
/// `‖e^{tΔ}f‖_p ≤ γ‖f‖_p`. Fields are a random high-pass part plus a low part
/// scaled until the hypothesis reaches `target_fraction·γ/2`.
pub fn frequency_decay_corpus(cfg: &DecayCorpusConfig, kappa: f64) -> Result<(SuiteReport, Vec<LemmaVerdict>)> {
    let grid = GridSpec::periodic(2, cfg.n, 1.0)?;
    let bands = BandSystem::new(&grid)?;
    let k_hi = cfg.n as f64 / 3.0;
    let mut jobs = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        for (i, s) in case_seeds(cfg.seed, 100 + gi as u64, cfg.count).into_iter().enumerate() {
            jobs.push((gamma, i, s));
        }
    }
    let verdicts: Vec<Vec<LemmaVerdict>> = jobs
        .par_iter()
        .map(|&(gamma, i, seed)| {
            let t = frequency_harness_time(cfg.n, gamma);
            let cut = BandSystem::decay_cut(kappa, gamma, t) as f64;
            // Odd members sit in the two octaves around the cut, where the
            // heat flow damps least.
            let edge = 2f64.powf(cut);
            let (lo, hi) = if i % 2 == 1 { ((0.25 * edge).max(1.0), (2.0 * edge).min(k_hi)) } else { (1.0, k_hi) };
            let g = random::divergence_free(&grid, lo, hi.max(lo), &mut random::rng(seed))?;
            let low = bands.project(&g, BandSelector::below(cut))?;
            let high = g.sub(&low)?;
            let (hp, lp) = (high.to_physical(), low.to_physical());
            let hl = bands.project(&high, BandSelector::below(cut))?.to_physical();
            let ll = bands.project(&low, BandSelector::below(cut))?.to_physical();
            cfg.ps
                .iter()
                .map(|&p| {
                    let s = bisect_scale(cfg.target_fraction * gamma / 2.0, |s| {
                        Ok(norm(&comb(&hl, &ll, s)?, p)? / norm(&comb(&hp, &lp, s)?, p)?)
                    })?;
                    let f = high.lincomb(1.0, &low, s)?;
                    bands.frequency_decay_verify(&f, gamma, t, p, kappa)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let verdicts: Vec<LemmaVerdict> = verdicts.into_iter().flatten().collect();
    let mut report = SuiteReport::new("frequency-sparseness-decay", "kappa_freq", kappa);
    verdicts.iter().for_each(|v| report.record_verdict(v));
    Ok((report, verdicts))
}

/// Reference lattice edge `L/32`; the harness time is `t = (h_ref/γ)²`, so
/// the lemma's lattice edge is `κ·h_ref` for every `γ`.
pub fn lattice_harness_time(grid: &GridSpec, gamma: f64) -> f64 {
    (grid.period() / 32.0 / gamma).powi(2)
}

/// Lemma: `‖J_h f‖_p ≤ (γ/2)‖f‖_p` with `h = κγ√t` implies
/// `‖e^{tΔ}f‖_p ≤ γ‖f‖_p`. Fields are `g − J_h g + s J_h g` with `s` set so
/// that the hypothesis reaches `target_fraction·γ/2`.
pub fn lattice_decay_corpus(cfg: &DecayCorpusConfig, kappa: f64) -> Result<(SuiteReport, Vec<LemmaVerdict>)> {
    let grid = GridSpec::periodic(2, cfg.n, 1.0)?;
    let k_hi = cfg.n as f64 / 3.0;
    let mut jobs = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        for (i, s) in case_seeds(cfg.seed, 200 + gi as u64, cfg.count).into_iter().enumerate() {
            jobs.push((gamma, i, s));
        }
    }
    let verdicts: Vec<Vec<LemmaVerdict>> = jobs
        .par_iter()
        .map(|&(gamma, i, seed)| {
            let t = lattice_harness_time(&grid, gamma);
            let h = decay_edge(kappa, gamma, t);
            let lattice = match CubeLattice::new(&grid, h, false) {
                Ok(l) => l,
                Err(crate::Error::Precondition(_)) => {
                    return Ok(cfg
                        .ps
                        .iter()
                        .map(|&p| LemmaVerdict::skipped(Outcome::Inconclusive, gamma, h, p, t))
                        .collect())
                }
                Err(e) => return Err(e),
            };
            // Odd members oscillate on the cell scale, so their cell averages
            // are small while the heat flow barely damps them.
            let mut rng = random::rng(seed);
            let cell = 2.0 * std::f64::consts::PI / lattice.h();
            let g = if i % 2 == 1 && 0.75 * cell < k_hi {
                random::divergence_free(&grid, 0.75 * cell, (1.5 * cell).min(k_hi), &mut rng)?.to_physical()
            } else {
                random::smooth_spectrum(&grid, 2, k_hi, 1.0, &mut rng)?.to_physical()
            };
            let coarse = lattice.interpolant_jh(&g)?;
            let fine = g.sub(&coarse)?;
            cfg.ps
                .iter()
                .map(|&p| {
                    let s = bisect_scale(cfg.target_fraction * gamma / 2.0, |s| {
                        Ok(s * norm(&coarse, p)? / norm(&comb(&fine, &coarse, s)?, p)?)
                    })?;
                    let f = comb(&fine, &coarse, s)?.to_spectral()?;
                    lemma_discrete_decay_verify(&f, gamma, t, p, kappa)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let verdicts: Vec<LemmaVerdict> = verdicts.into_iter().flatten().collect();
    let mut report = SuiteReport::new("lattice-decay", "kappa_disc", kappa);
    verdicts.iter().for_each(|v| report.record_verdict(v));
    Ok((report, verdicts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalCorpusConfig {
    pub n: usize,
    pub count: usize,
    pub gammas: Vec<f64>,
    pub ps: Vec<f64>,
    pub t: f64,
    pub seed: u64,
}

impl PhysicalCorpusConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            n: 256,
            count: 40,
            gammas: vec![0.05, 0.1, 0.2],
            ps: vec![2.0, f64::INFINITY],
            t: 0.02,
            seed,
        }
    }
}

/// Lemma: an `(ε, β, ℓ̄√t)`-sparse field with `ℓ̄² = C0 ln(C0/γ)` decays by
/// `γ` under `e^{tΔ}`. Fields are clusters of Gaussian bumps with widths
/// from `0.05√t` to `√t`; non-sparse members are tallied as not applicable.
pub fn physical_decay_corpus(cfg: &PhysicalCorpusConfig, c0: f64) -> Result<(SuiteReport, Vec<LemmaVerdict>)> {
    let grid = GridSpec::periodic(2, cfg.n, 1.0)?;
    let rt = cfg.t.sqrt();
    let mut jobs = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        for (i, s) in case_seeds(cfg.seed, 300 + gi as u64, cfg.count).into_iter().enumerate() {
            jobs.push((gamma, i, s));
        }
    }
    let verdicts: Vec<Vec<LemmaVerdict>> = jobs
        .par_iter()
        .map(|&(gamma, i, seed)| {
            let mut rng = random::rng(seed);
            let bumps = 1 + i % 6;
            let width_hi = rt * [0.1, 0.3, 1.0][i % 3];
            let f = random::bump_cluster(&grid, bumps, (0.05 * rt, width_hi), 1.5, &mut rng).to_spectral()?;
            cfg.ps
                .iter()
                .map(|&p| {
                    let s = SparsityDecaySchedule::new(gamma, cfg.t, p, 2, c0)?;
                    Ok(caloric_sparse_decay_verify(&f, &s)?.verdict)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let verdicts: Vec<LemmaVerdict> = verdicts.into_iter().flatten().collect();
    let mut report = SuiteReport::new("physical-sparseness-decay", "c0", c0);
    verdicts.iter().for_each(|v| report.record_verdict(v));
    Ok((report, verdicts))
}

/// A field whose frequency hypothesis fails, submitted as if it held.
pub fn planted_violation(kappa: f64) -> Result<LemmaVerdict> {
    let grid = GridSpec::periodic(2, 64, 1.0)?;
    let bands = BandSystem::new(&grid)?;
    // The mean lies below every cut, so the hypothesis fails for any `κ`.
    let f = PhysicalField::vector_from_fn(grid, |x| [0.0, 1.0 + 0.5 * x[0].cos(), 0.0]).to_spectral()?;
    let gamma = 0.1;
    let v = bands.frequency_decay_verify(&f, gamma, frequency_harness_time(64, gamma), 2.0, kappa)?;
    debug_assert!(v.outcome == Outcome::NotApplicable || v.outcome == Outcome::Inconclusive);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> DecayCorpusConfig {
        DecayCorpusConfig {
            n: 64,
            count: 4,
            gammas: vec![0.1],
            ps: vec![2.0, f64::INFINITY],
            seed,
            target_fraction: 0.9,
        }
    }

    #[test]
    fn bisection_hits_the_target() {
        let s = bisect_scale(0.3, |s| Ok(s / (1.0 + s))).unwrap();
        assert!((s / (1.0 + s) - 0.3).abs() < 1e-9);
        assert_eq!(bisect_scale(0.3, |_| Ok(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn frequency_corpus_places_hypothesis_near_bound() {
        let (r, v) = frequency_decay_corpus(&small(1), 1.0).unwrap();
        assert_eq!(r.cases, 8);
        // Shell members whose high part alone leaks past γ/2 come back not applicable.
        let evaluated: Vec<_> = v.iter().filter(|x| matches!(x.outcome, Outcome::Pass | Outcome::Fail)).collect();
        assert!(!evaluated.is_empty());
        for x in evaluated {
            assert!(x.hypothesis_value <= x.hypothesis_bound * (1.0 + 1e-6), "{x:?}");
            assert!(x.hypothesis_value >= 0.5 * x.hypothesis_bound, "{x:?}");
        }
    }

    #[test]
    fn lattice_corpus_places_hypothesis_near_bound() {
        let (r, v) = lattice_decay_corpus(&small(2), 1.0).unwrap();
        assert_eq!(r.cases, 8);
        for x in v.iter().filter(|x| x.outcome != Outcome::Inconclusive) {
            assert!(x.hypothesis_value <= x.hypothesis_bound * (1.0 + 1e-6), "{x:?}");
            assert!(x.hypothesis_value >= 0.5 * x.hypothesis_bound, "{x:?}");
        }
    }

    #[test]
    fn physical_corpus_runs_and_is_deterministic() {
        let cfg = PhysicalCorpusConfig {
            n: 128,
            count: 3,
            gammas: vec![0.1],
            ps: vec![f64::INFINITY],
            t: 0.02,
            seed: 5,
        };
        let (a, _) = physical_decay_corpus(&cfg, 3.0).unwrap();
        let (b, _) = physical_decay_corpus(&cfg, 3.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cases, 3);
    }

    #[test]
    fn planted_violation_is_not_a_failure() {
        for kappa in [0.25, 1.0, 4.0] {
            let v = planted_violation(kappa).unwrap();
            assert_eq!(v.outcome, Outcome::NotApplicable, "kappa {kappa}");
        }
    }
}
