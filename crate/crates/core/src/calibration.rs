//! Universal constants left unspecified by the analysis, with provenance.
//!
//! A ledger is a versioned JSON document. The build embeds the default
//! ledger produced by the `calibrate` command; experiments may load another.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EMBEDDED_LEDGER: &str = include_str!("../data/calibration.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    /// Derived from a seeded sweep.
    Calibrated { seed: u64, rule: String },
    /// Fixed by hand.
    Configured { note: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

impl Constant {
    pub fn calibrated(value: f64, seed: u64, rule: impl Into<String>) -> Self {
        Self {
            value,
            provenance: Provenance::Calibrated {
                seed,
                rule: rule.into(),
            },
        }
    }

    pub fn configured(value: f64, note: impl Into<String>) -> Self {
        Self {
            value,
            provenance: Provenance::Configured { note: note.into() },
        }
    }
}

/// Key under which a per-`p` constant is stored (`"4"`, `"inf"`).
pub fn p_key(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    /// Bilinear/kernel estimate constant.
    pub c_b: Constant,
    /// Caloric sparseness scale constant.
    pub c0: Constant,
    /// Predictability criterion constant.
    pub c5: Constant,
    /// Tracked constant `C` in the predictability decay rate `C m²/(2c₅)`.
    pub decay_rate: Constant,
    /// Local well-posedness time constants, keyed by [`p_key`].
    pub c_tilde_p: BTreeMap<String, Constant>,
    /// Frequency cut proportionality `2^J = κ γ⁻¹ t^{−1/2}`.
    pub kappa_freq: Constant,
    /// Lattice edge proportionality `h = κ γ √t`.
    pub kappa_disc: Constant,
    /// Sup of `‖I_{h,t}f‖_p / ‖J_h f‖_p`.
    pub k_i: Constant,
    /// Sup of the Bernstein gradient ratio.
    pub k_bern: Constant,
    /// Sup of `‖f − J_h f‖₂ / (h‖∇f‖₂)`.
    pub c_poinc: Constant,
    /// Sup of the convolution integral over its algebraic bound.
    pub c_tsai: Constant,
}

impl CalibrationConstants {
    pub fn c_tilde(&self, p: f64) -> Result<f64> {
        self.c_tilde_p
            .get(&p_key(p))
            .map(|c| c.value)
            .ok_or_else(|| Error::Precondition(format!("ledger has no c̃_p entry for p = {}", p_key(p))))
    }

    fn check(&self) -> Result<()> {
        let mut all: Vec<(&str, &Constant)> = vec![
            ("C_B", &self.c_b),
            ("C0", &self.c0),
            ("c5", &self.c5),
            ("decay_rate", &self.decay_rate),
            ("kappa_freq", &self.kappa_freq),
            ("kappa_disc", &self.kappa_disc),
            ("K_I", &self.k_i),
            ("K_bern", &self.k_bern),
            ("C_poinc", &self.c_poinc),
            ("C_tsai", &self.c_tsai),
        ];
        all.extend(self.c_tilde_p.values().map(|c| ("c_tilde_p", c)));
        for (name, c) in all {
            if !(c.value > 0.0 && c.value.is_finite()) {
                return Err(Error::Format(format!(
                    "calibration constant {name} must be positive and finite, got {}",
                    c.value
                )));
            }
        }
        if self.c0.value <= 1.0 {
            return Err(Error::Format("C0 must exceed 1".into()));
        }
        Ok(())
    }
}

/// One rung of a calibration sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRung {
    pub constant: String,
    pub value: f64,
    pub cases: usize,
    pub counterexamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationLedger {
    pub version: String,
    pub seed: u64,
    pub constants: CalibrationConstants,
    #[serde(default)]
    pub sweeps: Vec<SweepRung>,
}

impl CalibrationLedger {
    pub fn from_json(text: &str) -> Result<Self> {
        let ledger: Self = serde_json::from_str(text)?;
        if ledger.version.trim().is_empty() {
            return Err(Error::Format("ledger version is empty".into()));
        }
        ledger.constants.check()?;
        Ok(ledger)
    }

    pub fn embedded() -> Self {
        Self::from_json(EMBEDDED_LEDGER).expect("embedded calibration ledger is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read calibration ledger {}: {e}", path.display()),
            ))
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
