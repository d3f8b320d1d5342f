use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    /// The lemma's hypothesis does not hold for this input.
    NotApplicable,
    /// The required scale is not representable on the grid.
    Inconclusive,
}

impl Outcome {
    pub fn is_counterexample(self) -> bool {
        self == Outcome::Fail
    }
}

/// Result of a conditional decay check `‖e^{tΔ}f‖_p ≤ γ‖f‖_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub outcome: Outcome,
    /// `‖e^{tΔ}f‖_p / ‖f‖_p`, NaN when not evaluated.
    pub decay_ratio: f64,
    pub gamma: f64,
    /// `γ − decay_ratio`; positive means the conclusion holds.
    pub margin: f64,
    /// Measured left side of the hypothesis.
    pub hypothesis_value: f64,
    /// Threshold the hypothesis compares against.
    pub hypothesis_bound: f64,
    /// Scale used (`J` for frequency, `h` for lattice, `ℓ̄√t` for physical).
    pub scale: f64,
    pub p: f64,
    pub t: f64,
}

impl LemmaVerdict {
    pub(crate) fn skipped(outcome: Outcome, gamma: f64, scale: f64, p: f64, t: f64) -> Self {
        Self {
            outcome,
            decay_ratio: f64::NAN,
            gamma,
            margin: f64::NAN,
            hypothesis_value: f64::NAN,
            hypothesis_bound: f64::NAN,
            scale,
            p,
            t,
        }
    }
}

/// Ratio measurement that may be vacuous (zero denominator).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ratio: f64,
    pub vacuous: bool,
}

impl RatioReport {
    pub fn vacuous() -> Self {
        Self {
            ratio: 0.0,
            vacuous: true,
        }
    }

    pub fn of(num: f64, den: f64) -> Self {
        if den <= 0.0 || !den.is_finite() {
            Self::vacuous()
        } else {
            Self {
                ratio: num / den,
                vacuous: false,
            }
        }
    }
}
