//! Exponential, linear and power-law regimes of a growth series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_WINDOW: usize = 16;
/// Fits with `R²` below this are flagged.
pub const R2_FLAG: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Half-open sample range `[start, end)`.
    pub start: usize,
    pub end: usize,
}

fn least_squares(x: &[f64], y: &[f64], start: usize) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r2,
        start,
        end: start + x.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `ln E = ln E₀ + L t` on the early window; `slope` is `L`.
    pub exponential: LineFit,
    /// `E = a + r t` on the late window; `slope` is `r`.
    pub linear: LineFit,
    /// `ln E = c + α ln t` over all samples with `t, E > 0`; `slope` is `α`.
    pub power: LineFit,
    /// First sample of the late window.
    pub breakpoint: usize,
    /// Fits whose `R²` fell below [`R2_FLAG`].
    pub flags: Vec<String>,
}

impl GrowthFit {
    pub fn lyapunov(&self) -> f64 {
        self.exponential.slope
    }

    pub fn linear_rate(&self) -> f64 {
        self.linear.slope
    }

    pub fn power_exponent(&self) -> f64 {
        self.power.slope
    }
}

/// Fits the three regimes, placing the early/late split by segmented
/// regression: the breakpoint minimises `(1 − R²_early) + (1 − R²_late)`,
/// each window holding at least [`MIN_WINDOW`] samples. Shorter series
/// (between one and two windows) use the full range for both fits.
pub fn fit_growth_regimes(times: &[f64], values: &[f64]) -> Result<GrowthFit> {
    if times.len() != values.len() {
        return Err(Error::param("times and values differ in length"));
    }
    let n = times.len();
    if n < MIN_WINDOW {
        return Err(Error::param(format!(
            "growth fit needs at least {MIN_WINDOW} samples, got {n}"
        )));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::param("growth series contains non-finite samples"));
    }
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Precondition(
            "exponential fit needs strictly positive values".into(),
        ));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();

    let (exponential, linear, breakpoint) = if n < 2 * MIN_WINDOW {
        (
            least_squares(times, &logs, 0),
            least_squares(times, values, 0),
            0,
        )
    } else {
        let mut best: Option<(f64, LineFit, LineFit, usize)> = None;
        for b in MIN_WINDOW..=n - MIN_WINDOW {
            let e = least_squares(&times[..b], &logs[..b], 0);
            let l = least_squares(&times[b..], &values[b..], b);
            let cost = (1.0 - e.r2) + (1.0 - l.r2);
            if best.as_ref().is_none_or(|(c, ..)| cost < *c) {
                best = Some((cost, e, l, b));
            }
        }
        let (_, e, l, b) = best.expect("at least one admissible breakpoint");
        (e, l, b)
    };

    let (lx, ly): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .unzip();
    let first_positive = n - lx.len();
    let power = if lx.len() >= 2 {
        least_squares(&lx, &ly, first_positive)
    } else {
        LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r2: f64::NAN,
            start: first_positive,
            end: n,
        }
    };

    let mut flags = Vec::new();
    for (name, fit) in [("exponential", &exponential), ("linear", &linear), ("power", &power)] {
        if !(fit.r2 >= R2_FLAG) {
            flags.push(format!("{name} fit R² = {:.4}", fit.r2));
        }
    }
    Ok(GrowthFit {
        exponential,
        linear,
        power,
        breakpoint,
        flags,
    })
}
