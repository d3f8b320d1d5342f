//! Derives a calibration ledger from seeded sweeps.
//!
//! Cut proportionalities and the sparseness constant are chosen on rung
//! ladders; sup-type constants take the sweep maximum times [`HEADROOM`].

use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use super::lemmas::{frequency_decay_corpus, lattice_decay_corpus, physical_decay_corpus, DecayCorpusConfig, PhysicalCorpusConfig};
use super::matrix::{build_matrix, evaluate_matrix, MatrixConfig, MatrixScales};
use super::sweeps::{
    bernstein_sweep, bilinear_sweep, existence_time_sweep, gaussian_interpolant_sweep, poincare_sweep, tsai_sweep,
    ExistenceTimeSample, RatioSample,
};
use super::SuiteReport;
use crate::calibration::{p_key, CalibrationConstants, CalibrationLedger, Constant, SweepRung};
use crate::error::{Error, Result};
use crate::lab::predictability::PredictabilityParams;

/// Multiplier applied to measured sups.
pub const HEADROOM: f64 = 1.1;
/// Tracked decay constant `C`; not calibrated.
pub const DECAY_RATE: f64 = 0.5;

pub const KAPPA_FREQ_RUNGS: [f64; 9] = [0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0];
pub const KAPPA_DISC_RUNGS: [f64; 8] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const C0_RUNGS: [f64; 6] = [1.5, 2.0, 3.0, 5.0, 8.0, 12.0];
pub const C5_RUNGS: [f64; 16] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0, 50.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub seed: u64,
    pub decay: DecayCorpusConfig,
    pub physical: PhysicalCorpusConfig,
    pub matrix: MatrixConfig,
    /// Fields per ratio sweep.
    pub sweep_count: usize,
    pub bilinear_count: usize,
    pub existence_per_amplitude: usize,
    /// Existence runs stop at `horizon·‖u₀‖_∞^{−2}`.
    pub existence_horizon: f64,
}

impl CalibrationPlan {
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            decay: DecayCorpusConfig::standard(seed),
            physical: PhysicalCorpusConfig::standard(seed),
            matrix: MatrixConfig::standard(seed),
            sweep_count: 200,
            bilinear_count: 24,
            existence_per_amplitude: 6,
            existence_horizon: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub ledger: CalibrationLedger,
    /// Suite tallies at the chosen values.
    pub suites: Vec<SuiteReport>,
    pub existence: Vec<ExistenceTimeSample>,
}

/// Ledger version for a calibration seed.
pub fn ledger_version(seed: u64) -> String {
    format!("1.0+seed.{seed}")
}

struct Ladder<'a> {
    constant: &'a str,
    rungs: &'a [f64],
    ascending: bool,
}

/// Walks the ladder in search order and stops at the first rung whose suite
/// has no counterexample and at least one passing case.
fn climb(
    ladder: Ladder<'_>,
    sweeps: &mut Vec<SweepRung>,
    mut eval: impl FnMut(f64) -> Result<SuiteReport>,
) -> Result<(f64, SuiteReport)> {
    let mut order = ladder.rungs.to_vec();
    if !ladder.ascending {
        order.reverse();
    }
    for v in order {
        let rep = eval(v)?;
        info!("{} = {v}: {} cases, {} pass, {} fail", ladder.constant, rep.cases, rep.pass, rep.fail);
        sweeps.push(SweepRung {
            constant: ladder.constant.into(),
            value: v,
            cases: rep.cases,
            counterexamples: rep.fail,
        });
        if rep.passed() {
            return Ok((v, rep));
        }
    }
    Err(Error::Precondition(format!("no rung of {} passed its corpus", ladder.constant)))
}

fn sup_constant(
    name: &str,
    samples: &[&RatioSample],
    seed: u64,
    sweeps: &mut Vec<SweepRung>,
    suites: &mut Vec<SuiteReport>,
) -> Result<Constant> {
    let max = samples.iter().map(|s| s.max()).fold(0.0, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::Precondition(format!("{name} sweep produced no finite ratio")));
    }
    let value = HEADROOM * max;
    let mut cases = 0;
    for s in samples {
        let rep = s.against(name, value);
        cases += rep.cases;
        suites.push(rep);
    }
    sweeps.push(SweepRung {
        constant: name.into(),
        value,
        cases,
        counterexamples: 0,
    });
    Ok(Constant::calibrated(value, seed, format!("{HEADROOM} x sweep maximum {max:e}")))
}

/// Runs every sweep of the plan and assembles the ledger.
pub fn calibrate(plan: &CalibrationPlan) -> Result<CalibrationRun> {
    let seed = plan.seed;
    let mut sweeps = Vec::new();
    let mut suites = Vec::new();

    let (kappa_freq, rep) = climb(
        Ladder { constant: "kappa_freq", rungs: &KAPPA_FREQ_RUNGS, ascending: true },
        &mut sweeps,
        |k| frequency_decay_corpus(&plan.decay, k).map(|r| r.0),
    )?;
    suites.push(rep);
    let (kappa_disc, rep) = climb(
        Ladder { constant: "kappa_disc", rungs: &KAPPA_DISC_RUNGS, ascending: false },
        &mut sweeps,
        |k| lattice_decay_corpus(&plan.decay, k).map(|r| r.0),
    )?;
    suites.push(rep);
    let (c0, rep) = climb(
        Ladder { constant: "c0", rungs: &C0_RUNGS, ascending: true },
        &mut sweeps,
        |c| physical_decay_corpus(&plan.physical, c).map(|r| r.0),
    )?;
    suites.push(rep);

    let runs = build_matrix(&plan.matrix)?;
    let scales = MatrixScales::for_runs(&runs)?;
    let (c5, rep) = climb(
        Ladder { constant: "c5", rungs: &C5_RUNGS, ascending: false },
        &mut sweeps,
        |c| evaluate_matrix(&runs, &scales, &PredictabilityParams::new(c, DECAY_RATE)?).map(|r| r.0),
    )?;
    suites.push(rep);

    let (grad, integ) = bernstein_sweep(plan.sweep_count, seed)?;
    let k_bern = sup_constant("K_bern", &[&grad, &integ], seed, &mut sweeps, &mut suites)?;
    let c_poinc = sup_constant("C_poinc", &[&poincare_sweep(plan.sweep_count / 4, seed)?], seed, &mut sweeps, &mut suites)?;
    let k_i = sup_constant(
        "K_I",
        &[&gaussian_interpolant_sweep(plan.sweep_count / 4, seed)?],
        seed,
        &mut sweeps,
        &mut suites,
    )?;
    let c_tsai = sup_constant("C_tsai", &[&tsai_sweep()?], seed, &mut sweeps, &mut suites)?;
    let c_b = sup_constant("C_B", &[&bilinear_sweep(plan.bilinear_count, seed)?], seed, &mut sweeps, &mut suites)?;

    let existence = existence_time_sweep(plan.existence_per_amplitude, plan.existence_horizon, seed)?;
    let mut c_tilde_p = BTreeMap::new();
    for s in &existence {
        let rule = format!(
            "min scaled doubling time over {} runs ({} censored at horizon {})",
            s.scaled_times.len(),
            s.censored,
            plan.existence_horizon
        );
        sweeps.push(SweepRung {
            constant: format!("c_tilde_{}", p_key(s.p)),
            value: s.constant(),
            cases: s.scaled_times.len(),
            counterexamples: 0,
        });
        c_tilde_p.insert(p_key(s.p), Constant::calibrated(s.constant(), seed, rule));
    }

    let constants = CalibrationConstants {
        c_b,
        c0: Constant::calibrated(c0, seed, "smallest rung with zero counterexamples"),
        c5: Constant::calibrated(c5, seed, "largest rung with zero counterexamples over the matrix"),
        decay_rate: Constant::configured(DECAY_RATE, "tracked constant of the decay rate"),
        c_tilde_p,
        kappa_freq: Constant::calibrated(kappa_freq, seed, "smallest rung with zero counterexamples"),
        kappa_disc: Constant::calibrated(kappa_disc, seed, "largest rung with zero counterexamples"),
        k_i,
        k_bern,
        c_poinc,
        c_tsai,
    };
    let ledger = CalibrationLedger {
        version: ledger_version(seed),
        seed,
        constants,
        sweeps,
    };
    // Round trip enforces the ledger invariants.
    let ledger = CalibrationLedger::from_json(&ledger.to_json()?)?;
    Ok(CalibrationRun {
        ledger,
        suites,
        existence,
    })
}
