//! Per-snapshot diagnostics of a twin run and their CSV form.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationConstants;
use crate::error::{Error, Result};
use crate::field::norm;
use crate::littlewood_paley::BandSystem;

use super::diagnostics::{
    annulus_ratio, band_ratio_diagnostics, critical_exponent, lattice_ratio_diagnostics, type_one_diagnostics,
    BandRatioParams, BandRatioReport, LatticeRatioParams, LatticeRatioReport, ScaleFormulaInputs,
};
use super::predictability::{predictability_monitor, PredictabilityParams, PredictabilityVerdict, Scale};
use super::twin::TwinRun;

/// Experiment parameters for a trace; constants come from the ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Exponents of the reported `‖w‖_p` and scaled-norm columns.
    pub p_list: Vec<f64>,
    /// Exponent of the band and lattice ratios.
    pub ratio_p: f64,
    /// Type I exponent grid.
    pub q_grid: Vec<f64>,
    pub eta: f64,
    /// De-correlation comparator fraction.
    pub gamma: f64,
    pub epsilon2: f64,
    pub epsilon3: f64,
    pub j3_constant: f64,
    pub ladder: Vec<Scale>,
}

impl TraceConfig {
    pub fn defaults(bands: &BandSystem) -> Self {
        let d = bands.grid().dim() as f64;
        Self {
            p_list: vec![2.0, 2.0 * d, f64::INFINITY],
            ratio_p: f64::INFINITY,
            q_grid: vec![2.0 * d, 4.0 * d, f64::INFINITY],
            eta: 1.0,
            gamma: 1.0,
            epsilon2: 0.1,
            epsilon3: 0.5,
            j3_constant: 0.5,
            ladder: super::predictability::default_ladder(bands),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub error_energy: f64,
    pub comparator: f64,
    /// `‖w‖_p` for each configured `p`.
    pub norms: Vec<f64>,
    /// `t^{½−d/(2p)}‖w‖_p`.
    pub scaled_norms: Vec<f64>,
    pub annulus_ratio: Option<f64>,
    pub type_one: f64,
    pub type_one_centered: f64,
    /// Running sup of the Type I quantity.
    pub c1: f64,
    /// Running inf over `t > 0` of the scaled error norm at the ratio exponent.
    pub c2: Option<f64>,
    pub band: Option<BandRatioReport>,
    pub lattice: Option<LatticeRatioReport>,
    pub besov_minus_one: f64,
    pub besov_running_inf: f64,
    pub predictability_cases: usize,
    pub predictability_asserted: usize,
    pub predictability_counterexamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationTrace {
    pub config: TraceConfig,
    pub records: Vec<TraceRecord>,
    pub verdicts: Vec<PredictabilityVerdict>,
}

struct Pointwise {
    error_energy: f64,
    comparator: f64,
    norms: Vec<f64>,
    scaled_norms: Vec<f64>,
    ratio_scaled: f64,
    annulus_ratio: Option<f64>,
    type_one: f64,
    type_one_centered: f64,
    besov_minus_one: f64,
}

fn index_of(p_list: &[f64], p: f64) -> Option<usize> {
    p_list.iter().position(|&q| q == p)
}

pub fn separation_trace(
    bands: &BandSystem,
    twin: &TwinRun,
    config: &TraceConfig,
    constants: &CalibrationConstants,
) -> Result<SeparationTrace> {
    let grid = *bands.grid();
    let d = grid.dim();
    if config.q_grid.iter().any(|&p| !(p > d as f64)) || !(config.ratio_p > d as f64) {
        return Err(Error::param(format!("Type I and ratio exponents must exceed the dimension {d}")));
    }
    if config.p_list.iter().any(|&p| !(p >= 1.0)) {
        return Err(Error::param("reported norm exponents must be at least 1"));
    }
    let c_tilde = constants.c_tilde(config.ratio_p)?;
    let times = twin.times().to_vec();
    let first: Vec<Pointwise> = (0..twin.len())
        .into_par_iter()
        .map(|i| {
            let t = times[i];
            let u = &twin.traj_u.snapshots[i];
            let v = &twin.traj_v.snapshots[i];
            let w = twin.error_at(i);
            let wp = w.to_physical();
            let norms = config.p_list.iter().map(|&p| norm(&wp, p)).collect::<Result<Vec<_>>>()?;
            let scaled = |p: f64, value: f64| t.powf(critical_exponent(d, p)) * value;
            let scaled_norms = config.p_list.iter().zip(&norms).map(|(&p, &n)| scaled(p, n)).collect();
            let ratio_norm = match index_of(&config.p_list, config.ratio_p) {
                Some(k) => norms[k],
                None => norm(&wp, config.ratio_p)?,
            };
            let annulus = annulus_ratio(&wp, t, config.eta, config.ratio_p).ok().map(|r| r.ratio);
            let one = type_one_diagnostics(bands, u, v, t, &config.q_grid)?;
            Ok(Pointwise {
                error_energy: w.l2_norm_sq(),
                comparator: 0.5 * config.gamma * (u.l2_norm_sq() + v.l2_norm_sq()),
                norms,
                scaled_norms,
                ratio_scaled: scaled(config.ratio_p, ratio_norm),
                annulus_ratio: annulus,
                type_one: one.scaled_norm_sup,
                type_one_centered: one.centered_constant,
                besov_minus_one: bands.besov_norm(&w, -1.0, f64::INFINITY, true)?.value,
            })
        })
        .collect::<Result<_>>()?;

    let mut c1 = Vec::with_capacity(first.len());
    let mut c2 = Vec::with_capacity(first.len());
    let mut besov_inf = Vec::with_capacity(first.len());
    let (mut sup, mut inf, mut binf) = (0.0f64, f64::INFINITY, f64::INFINITY);
    for (t, p) in times.iter().zip(&first) {
        sup = sup.max(p.type_one);
        if *t > 0.0 {
            inf = inf.min(p.ratio_scaled);
        }
        binf = binf.min(p.besov_minus_one);
        c1.push(sup);
        c2.push((inf.is_finite() && inf > 0.0).then_some(inf));
        besov_inf.push(binf);
    }

    let verdicts = predictability_monitor(
        bands,
        twin,
        &config.ladder,
        &PredictabilityParams::new(constants.c5.value, constants.decay_rate.value)?,
    )?;

    let records = (0..twin.len())
        .into_par_iter()
        .map(|i| {
            let t = times[i];
            let p = &first[i];
            let (band, lattice) = match c2[i] {
                Some(c2v) if t > 0.0 && p.norms.iter().any(|&n| n > 0.0) => {
                    let formulas = ScaleFormulaInputs {
                        c1: c1[i],
                        c2: c2v,
                        c_b: constants.c_b.value,
                        c_tilde_p: c_tilde,
                    };
                    let w = twin.error_at(i);
                    let u = &twin.traj_u.snapshots[i];
                    let v = &twin.traj_v.snapshots[i];
                    let band = band_ratio_diagnostics(
                        bands,
                        &w,
                        u,
                        v,
                        t,
                        config.ratio_p,
                        &BandRatioParams {
                            formulas,
                            epsilon2: config.epsilon2,
                            j3_constant: config.j3_constant,
                            kappa_freq: constants.kappa_freq.value,
                        },
                    );
                    let lattice = lattice_ratio_diagnostics(
                        &w,
                        u,
                        v,
                        t,
                        config.ratio_p,
                        &LatticeRatioParams {
                            formulas,
                            epsilon3: config.epsilon3,
                            kappa_disc: constants.kappa_disc.value,
                        },
                    );
                    (band.ok(), lattice.ok())
                }
                _ => (None, None),
            };
            let here: Vec<&PredictabilityVerdict> = verdicts.iter().filter(|v| v.time == t).collect();
            Ok(TraceRecord {
                time: t,
                error_energy: p.error_energy,
                comparator: p.comparator,
                norms: p.norms.clone(),
                scaled_norms: p.scaled_norms.clone(),
                annulus_ratio: p.annulus_ratio,
                type_one: p.type_one,
                type_one_centered: p.type_one_centered,
                c1: c1[i],
                c2: c2[i],
                band,
                lattice,
                besov_minus_one: p.besov_minus_one,
                besov_running_inf: besov_inf[i],
                predictability_cases: here.len(),
                predictability_asserted: here.iter().filter(|v| v.decay_asserted).count(),
                predictability_counterexamples: here.iter().filter(|v| v.is_counterexample()).count(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeparationTrace {
        config: config.clone(),
        records,
        verdicts,
    })
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn int_cell(v: Option<i32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SeparationTrace {
    /// Column names with one-line descriptions, in CSV order.
    pub fn columns(&self) -> Vec<(String, String)> {
        let mut cols: Vec<(String, String)> = vec![
            ("time".into(), "snapshot time".into()),
            ("error_energy".into(), "‖u − v‖₂²".into()),
            ("comparator".into(), "(γ/2)(‖u‖₂² + ‖v‖₂²)".into()),
        ];
        for &p in &self.config.p_list {
            cols.push((format!("w_norm_p{}", p_label(p)), format!("‖w‖_p, p = {}", p_label(p))));
        }
        for &p in &self.config.p_list {
            cols.push((
                format!("w_scaled_p{}", p_label(p)),
                format!("t^(1/2 − d/(2p)) ‖w‖_p, p = {}", p_label(p)),
            ));
        }
        let rows: [(&str, &str); 26] = [
            ("annulus_ratio", "inner-ball over complement L^p norm of w; empty if the ball does not fit; inf when the complement vanishes"),
            ("type_one", "sup over q of t^(1/2 − d/(2q))(‖u‖_q + ‖v‖_q) plus the Besov terms"),
            ("type_one_centered", "grid sup of (|u| + |v|)(|x| + √t)"),
            ("c1", "running sup of type_one"),
            ("c2", "running inf over t > 0 of the scaled error norm at the ratio exponent"),
            ("m0", "2 max(‖u‖_p, ‖v‖_p)"),
            ("gamma", "activity fraction from c2, M0 and the local existence time"),
            ("j1", "high-frequency cut; empty if unresolved"),
            ("high_low_j1", "‖w_{≥J1}‖_p / ‖w_{<J1}‖_p"),
            ("j2", "low-frequency cut"),
            ("high_low_j2", "‖w_{≥J2}‖_p / ‖w_{<J2}‖_p"),
            ("low_fraction_j2", "‖w_{<J2}‖_p / ‖w‖_p"),
            ("j3", "lower edge of the finite band"),
            ("finite_band_fraction", "‖w_{J3≤j≤J2}‖_p / ‖w‖_p"),
            ("h_bar", "residual lattice scale before snapping"),
            ("h_bar_snapped", "snapped residual lattice scale"),
            ("residual_ratio", "‖w − J_h̄ w‖_p / ‖w‖_p"),
            ("h", "large-scale lattice spacing before snapping"),
            ("h_snapped", "snapped large-scale lattice spacing"),
            ("large_scale_ratio", "‖J_h w‖_p / ‖w‖_p"),
            ("besov_minus_one", "sup_j 2^(−j) ‖Δ_j w‖_∞"),
            ("besov_running_inf", "running inf of besov_minus_one"),
            ("predictability_cases", "ladder scales evaluated at this time"),
            ("predictability_asserted", "scales where the criterion and admissibility hold"),
            ("predictability_counterexamples", "asserted scales with a non-negative decay margin"),
            ("predictable", "error_energy < comparator"),
        ];
        cols.extend(rows.iter().map(|(a, b)| (a.to_string(), b.to_string())));
        cols
    }

    /// One header line then one row per snapshot; empty cells are unresolved.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(self.columns().iter().map(|c| c.0.as_str())).map_err(io)?;
        for r in &self.records {
            let b = r.band.as_ref();
            let l = r.lattice.as_ref();
            let mut row = vec![format!("{:e}", r.time), format!("{:e}", r.error_energy), format!("{:e}", r.comparator)];
            row.extend(r.norms.iter().map(|v| format!("{v:e}")));
            row.extend(r.scaled_norms.iter().map(|v| format!("{v:e}")));
            row.extend([
                cell(r.annulus_ratio),
                format!("{:e}", r.type_one),
                format!("{:e}", r.type_one_centered),
                format!("{:e}", r.c1),
                cell(r.c2),
                cell(b.map(|x| x.m0)),
                cell(b.map(|x| x.gamma)),
                int_cell(b.and_then(|x| x.j1)),
                cell(b.and_then(|x| x.high_low_ratio_j1)),
                int_cell(b.and_then(|x| x.j2)),
                cell(b.and_then(|x| x.high_low_ratio_j2)),
                cell(b.and_then(|x| x.low_fraction_j2)),
                int_cell(b.and_then(|x| x.j3)),
                cell(b.and_then(|x| x.finite_band_fraction)),
                cell(l.map(|x| x.h_bar)),
                cell(l.and_then(|x| x.h_bar_snapped)),
                cell(l.and_then(|x| x.residual_ratio)),
                cell(l.map(|x| x.h)),
                cell(l.and_then(|x| x.h_snapped)),
                cell(l.and_then(|x| x.large_scale_ratio)),
                format!("{:e}", r.besov_minus_one),
                format!("{:e}", r.besov_running_inf),
                r.predictability_cases.to_string(),
                r.predictability_asserted.to_string(),
                r.predictability_counterexamples.to_string(),
                (r.error_energy < r.comparator).to_string(),
            ]);
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Predictability verdicts as JSON lines.
    pub fn write_verdicts<W: Write>(&self, mut out: W) -> Result<()> {
        for v in &self.verdicts {
            serde_json::to_writer(&mut out, v)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
