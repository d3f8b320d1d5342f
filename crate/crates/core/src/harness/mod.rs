//! Seeded corpora that exercise the decay lemmas, the inequality sweeps and
//! the predictability criterion, and the calibration of the ledger from them.

pub mod calibrate;
pub mod lemmas;
pub mod matrix;
pub mod sweeps;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::random;
use crate::verdict::{LemmaVerdict, Outcome};

/// Tally of one suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    /// Constant under test and its value.
    pub constant: String,
    pub constant_value: f64,
    pub cases: usize,
    pub pass: usize,
    pub fail: usize,
    pub not_applicable: usize,
    pub inconclusive: usize,
    /// Smallest margin over evaluated cases (positive means the bound held).
    pub min_margin: Option<f64>,
    /// Largest measured ratio over evaluated cases.
    pub max_ratio: Option<f64>,
}

impl SuiteReport {
    pub fn new(name: &str, constant: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            constant: constant.into(),
            constant_value: value,
            cases: 0,
            pass: 0,
            fail: 0,
            not_applicable: 0,
            inconclusive: 0,
            min_margin: None,
            max_ratio: None,
        }
    }

    /// No counterexample and at least one evaluated case.
    pub fn passed(&self) -> bool {
        self.fail == 0 && self.pass > 0
    }

    pub fn record(&mut self, outcome: Outcome, margin: f64, ratio: f64) {
        self.cases += 1;
        match outcome {
            Outcome::Pass => self.pass += 1,
            Outcome::Fail => self.fail += 1,
            Outcome::NotApplicable => self.not_applicable += 1,
            Outcome::Inconclusive => self.inconclusive += 1,
        }
        if matches!(outcome, Outcome::Pass | Outcome::Fail) {
            if margin.is_finite() {
                self.min_margin = Some(self.min_margin.map_or(margin, |m| m.min(margin)));
            }
            if ratio.is_finite() {
                self.max_ratio = Some(self.max_ratio.map_or(ratio, |m| m.max(ratio)));
            }
        }
    }

    pub fn record_verdict(&mut self, v: &LemmaVerdict) {
        self.record(v.outcome, v.margin, v.decay_ratio);
    }

    /// Ratio sweep case: passes when `ratio ≤ constant_value`.
    pub fn record_ratio(&mut self, ratio: f64) {
        let outcome = if ratio <= self.constant_value {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        self.record(outcome, self.constant_value - ratio, ratio);
    }

    pub fn merge(&mut self, other: &SuiteReport) {
        self.cases += other.cases;
        self.pass += other.pass;
        self.fail += other.fail;
        self.not_applicable += other.not_applicable;
        self.inconclusive += other.inconclusive;
        if let Some(m) = other.min_margin {
            self.min_margin = Some(self.min_margin.map_or(m, |x| x.min(m)));
        }
        if let Some(r) = other.max_ratio {
            self.max_ratio = Some(self.max_ratio.map_or(r, |x| x.max(r)));
        }
    }
}

/// Independent per-case seeds drawn from stream `tag` of the master seed.
pub(crate) fn case_seeds(seed: u64, tag: u64, count: usize) -> Vec<u64> {
    let mut r = random::rng(seed);
    r.set_stream(tag);
    (0..count).map(|_| r.next_u64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_and_merge() {
        let mut a = SuiteReport::new("x", "K", 2.0);
        a.record_ratio(1.5);
        a.record_ratio(2.5);
        a.record(Outcome::NotApplicable, f64::NAN, f64::NAN);
        assert_eq!((a.cases, a.pass, a.fail, a.not_applicable), (3, 1, 1, 1));
        assert_eq!(a.max_ratio, Some(2.5));
        assert_eq!(a.min_margin, Some(-0.5));
        assert!(!a.passed());
        let mut b = SuiteReport::new("x", "K", 2.0);
        assert!(!b.passed());
        b.merge(&a);
        assert_eq!(b.cases, 3);
    }

    #[test]
    fn seeds_are_reproducible_and_stream_separated() {
        assert_eq!(case_seeds(7, 1, 4), case_seeds(7, 1, 4));
        assert_ne!(case_seeds(7, 1, 4), case_seeds(7, 2, 4));
    }
}
