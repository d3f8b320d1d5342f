//! The five manifest commands.

use std::time::Instant;

use log::info;
use serde::Serialize;

use scalesep::harness::calibrate::{calibrate, CalibrationPlan};
use scalesep::harness::lemmas::{
    frequency_decay_corpus, lattice_decay_corpus, physical_decay_corpus, planted_violation, DecayCorpusConfig,
    PhysicalCorpusConfig,
};
use scalesep::harness::matrix::{build_matrix, evaluate_matrix, MatrixConfig, MatrixScales};
use scalesep::harness::sweeps::{bernstein_sweep, bilinear_sweep, gaussian_interpolant_sweep, poincare_sweep, tsai_sweep};
use scalesep::lab::growth::fit_growth_regimes;
use scalesep::lab::predictability::{default_ladder, predictability_monitor};
use scalesep::lab::trace::separation_trace;
use scalesep::lab::twin::run_twin;
use scalesep::ns_solver::energy_balance_check;
use scalesep::snapshot::write_snapshot;
use scalesep::{
    random, BandSystem, CalibrationConstants, CalibrationLedger, GridSpec, LemmaVerdict, Outcome, PerturbationSpec,
    PredictabilityParams, Solver, SolverConfig, SpectralField, SuiteReport, TraceConfig, TwinRun,
};

use crate::error::CliError;
use crate::manifest::{InitialKind, Manifest};
use crate::output::OutputDir;

/// Verdict of a command, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Breach,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Breach => 2,
            Status::Inconclusive => 3,
        }
    }

    fn of_suites(suites: &[SuiteReport]) -> Self {
        if suites.iter().any(|s| s.fail > 0) {
            Status::Breach
        } else if suites.is_empty() || suites.iter().any(|s| !s.passed()) {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

pub struct Context<'a> {
    pub manifest: &'a Manifest,
    pub ledger: &'a CalibrationLedger,
    pub out: &'a OutputDir,
}

impl Context<'_> {
    /// Ledger constants with the manifest's `c5` override applied.
    fn constants(&self) -> CalibrationConstants {
        let mut c = self.ledger.constants.clone();
        if let Some(c5) = self.manifest.monitor.c5 {
            c.c5 = scalesep::Constant::configured(c5, "manifest override");
        }
        c
    }

    fn predictability_params(&self) -> Result<PredictabilityParams, CliError> {
        let c = self.constants();
        Ok(PredictabilityParams::new(c.c5.value, c.decay_rate.value)?)
    }
}

pub fn run(ctx: &Context<'_>) -> Result<Status, CliError> {
    use crate::manifest::Command::*;
    ctx.out.json("manifest.json", ctx.manifest)?;
    let started = Instant::now();
    let status = match ctx.manifest.command {
        VerifyLemmas => verify_lemmas(ctx),
        RunTwin => run_twin_cmd(ctx),
        Monitor => monitor(ctx),
        ValidateSolver => validate_solver(ctx),
        Calibrate => calibrate_cmd(ctx),
    }?;
    info!("{} finished in {:.1?}: {status:?}", ctx.manifest.command.name(), started.elapsed());
    Ok(status)
}

#[derive(Serialize)]
struct SuiteVerdict<'a> {
    suite: &'a str,
    #[serde(flatten)]
    verdict: &'a LemmaVerdict,
}

#[derive(Serialize)]
struct LemmaReport<'a> {
    status: Status,
    suites: &'a [SuiteReport],
    planted_violation: &'a LemmaVerdict,
}

fn verify_lemmas(ctx: &Context<'_>) -> Result<Status, CliError> {
    let m = ctx.manifest;
    let c = ctx.constants();
    let decay = DecayCorpusConfig {
        count: m.lemmas.count,
        ..DecayCorpusConfig::standard(m.seed)
    };
    let physical = PhysicalCorpusConfig {
        count: m.lemmas.physical_count,
        ..PhysicalCorpusConfig::standard(m.seed)
    };
    let mut suites = Vec::new();
    let mut verdicts: Vec<(String, LemmaVerdict)> = Vec::new();
    for (rep, vs) in [
        frequency_decay_corpus(&decay, c.kappa_freq.value)?,
        lattice_decay_corpus(&decay, c.kappa_disc.value)?,
        physical_decay_corpus(&physical, c.c0.value)?,
    ] {
        verdicts.extend(vs.into_iter().map(|v| (rep.name.clone(), v)));
        suites.push(rep);
    }
    let planted = planted_violation(c.kappa_freq.value)?;
    let mut planted_suite = SuiteReport::new("planted-violation", "kappa_freq", c.kappa_freq.value);
    // A gated violation must come back not-applicable; anything else is a breach.
    planted_suite.record(
        if planted.outcome == Outcome::NotApplicable { Outcome::Pass } else { Outcome::Fail },
        f64::NAN,
        f64::NAN,
    );
    suites.push(planted_suite);

    let runs = build_matrix(&MatrixConfig::standard(m.seed))?;
    let (matrix, _) = evaluate_matrix(&runs, &MatrixScales::for_runs(&runs)?, &ctx.predictability_params()?)?;
    suites.push(matrix);

    if m.lemmas.sweep_count > 0 {
        let (grad, integ) = bernstein_sweep(m.lemmas.sweep_count, m.seed)?;
        suites.push(grad.against("K_bern", c.k_bern.value));
        suites.push(integ.against("K_bern", c.k_bern.value));
        suites.push(poincare_sweep(m.lemmas.sweep_count / 4, m.seed)?.against("C_poinc", c.c_poinc.value));
        suites.push(gaussian_interpolant_sweep(m.lemmas.sweep_count / 4, m.seed)?.against("K_I", c.k_i.value));
    }
    suites.push(tsai_sweep()?.against("C_tsai", c.c_tsai.value));
    if m.lemmas.bilinear_count > 0 {
        suites.push(bilinear_sweep(m.lemmas.bilinear_count, m.seed)?.against("C_B", c.c_b.value));
    }

    let status = Status::of_suites(&suites);
    for s in &suites {
        println!(
            "{:<28} {:>6} cases {:>6} pass {:>4} fail {:>5} n/a {:>5} inconclusive  {}",
            s.name,
            s.cases,
            s.pass,
            s.fail,
            s.not_applicable,
            s.inconclusive,
            if s.passed() { "ok" } else if s.fail > 0 { "BREACH" } else { "EMPTY" }
        );
    }
    ctx.out.json(
        "lemmas.json",
        &LemmaReport {
            status,
            suites: &suites,
            planted_violation: &planted,
        },
    )?;
    ctx.out.json_lines(
        "lemma_verdicts.jsonl",
        verdicts.iter().map(|(suite, verdict)| SuiteVerdict { suite, verdict }),
    )?;
    Ok(status)
}

fn initial_field(m: &Manifest, grid: &GridSpec) -> Result<SpectralField, CliError> {
    let u = match m.initial.kind {
        InitialKind::TaylorGreen => random::taylor_green(grid)?.scale(m.initial.amplitude),
        InitialKind::Random => {
            let unit = random::divergence_free(grid, m.initial.k_lo, m.initial.k_hi, &mut random::rng(m.seed.wrapping_add(1)))?;
            unit.scale(m.initial.amplitude)
        }
    };
    Ok(u)
}

fn twin_from_manifest(m: &Manifest) -> Result<(GridSpec, TwinRun), CliError> {
    let grid = GridSpec::periodic(m.grid.dim, m.grid.n, m.grid.viscosity)?;
    let u0 = initial_field(m, &grid)?;
    let spec = PerturbationSpec {
        amplitude: m.perturbation.amplitude,
        band: m.perturbation.band,
        seed: m.seed,
    };
    let cfg = SolverConfig::new(m.solver.dt, m.solver.t_end).with_stride(m.solver.stride);
    let twin = run_twin(&u0, spec, cfg)?;
    Ok((grid, twin))
}

#[derive(Serialize)]
struct SnapshotIndexEntry {
    time: f64,
    u: String,
    v: String,
}

#[derive(Serialize)]
struct SnapshotIndex<'a> {
    format: &'static str,
    viscosity: f64,
    snapshots: &'a [SnapshotIndexEntry],
}

fn write_snapshots(ctx: &Context<'_>, twin: &TwinRun) -> Result<(), CliError> {
    let mut index = Vec::new();
    for (i, &time) in twin.times().iter().enumerate() {
        let u = format!("snapshots/u_{i:04}.scsp");
        let v = format!("snapshots/v_{i:04}.scsp");
        let (fu, fv) = (twin.traj_u.snapshots[i].to_physical(), twin.traj_v.snapshots[i].to_physical());
        ctx.out.raw(&u, |mut w| write_snapshot(&mut w, &fu, time))?;
        ctx.out.raw(&v, |mut w| write_snapshot(&mut w, &fv, time))?;
        index.push(SnapshotIndexEntry { time, u, v });
    }
    ctx.out.json(
        "snapshots/index.json",
        &SnapshotIndex {
            format: "SCSP v1",
            viscosity: twin.traj_u.grid.viscosity(),
            snapshots: &index,
        },
    )
}

#[derive(Serialize)]
struct TwinSummary {
    status: Status,
    snapshots: usize,
    final_error_energy: f64,
    predictable_at_end: bool,
    predictability_asserted: usize,
    predictability_counterexamples: usize,
    growth_fit: Option<scalesep::lab::growth::GrowthFit>,
}

fn run_twin_cmd(ctx: &Context<'_>) -> Result<Status, CliError> {
    let m = ctx.manifest;
    let (grid, twin) = twin_from_manifest(m)?;
    let bands = BandSystem::new(&grid)?;
    let config = TraceConfig {
        gamma: m.diagnostics.gamma,
        eta: m.diagnostics.eta,
        ratio_p: m.diagnostics.ratio_p,
        epsilon2: m.diagnostics.epsilon2,
        epsilon3: m.diagnostics.epsilon3,
        j3_constant: m.diagnostics.j3_constant,
        ..TraceConfig::defaults(&bands)
    };
    let trace = separation_trace(&bands, &twin, &config, &ctx.constants())?;
    ctx.out.csv("trace.csv", |w| trace.write_csv(w))?;
    ctx.out.csv("trace_schema.csv", |w| {
        writeln!(w, "column,description")?;
        for (name, desc) in trace.columns() {
            writeln!(w, "{name},\"{}\"", desc.replace('"', "\"\""))?;
        }
        Ok(())
    })?;
    ctx.out.json_lines("verdicts.jsonl", trace.verdicts.iter())?;
    if m.output.snapshots {
        write_snapshots(ctx, &twin)?;
    }
    let energies: Vec<f64> = trace.records.iter().map(|r| r.error_energy).collect();
    let last = trace.records.last().expect("trajectory holds the initial state");
    let asserted = trace.verdicts.iter().filter(|v| v.decay_asserted).count();
    let counterexamples = trace.verdicts.iter().filter(|v| v.is_counterexample()).count();
    let status = if counterexamples > 0 { Status::Breach } else { Status::Pass };
    ctx.out.json(
        "summary.json",
        &TwinSummary {
            status,
            snapshots: trace.records.len(),
            final_error_energy: last.error_energy,
            predictable_at_end: last.error_energy < last.comparator,
            predictability_asserted: asserted,
            predictability_counterexamples: counterexamples,
            growth_fit: fit_growth_regimes(twin.times(), &energies).ok(),
        },
    )?;
    println!(
        "run-twin: {} snapshots, final E_delta {:e}, {asserted} asserted scales, {counterexamples} counterexamples",
        trace.records.len(),
        last.error_energy
    );
    Ok(status)
}

#[derive(Serialize)]
struct MonitorSummary {
    status: Status,
    c5: f64,
    decay_rate: f64,
    evaluated: usize,
    asserted: usize,
    counterexamples: usize,
    /// Largest measured margin over asserted cases; negative when all decay.
    max_asserted_margin: Option<f64>,
}

fn monitor(ctx: &Context<'_>) -> Result<Status, CliError> {
    let (grid, twin) = twin_from_manifest(ctx.manifest)?;
    let bands = BandSystem::new(&grid)?;
    let params = ctx.predictability_params()?;
    let verdicts = predictability_monitor(&bands, &twin, &default_ladder(&bands), &params)?;
    let asserted: Vec<_> = verdicts.iter().filter(|v| v.decay_asserted).collect();
    let counterexamples = asserted.iter().filter(|v| v.is_counterexample()).count();
    let status = if counterexamples > 0 {
        Status::Breach
    } else if asserted.is_empty() {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    ctx.out.json_lines("verdicts.jsonl", verdicts.iter())?;
    let summary = MonitorSummary {
        status,
        c5: params.c5,
        decay_rate: params.decay_rate,
        evaluated: verdicts.len(),
        asserted: asserted.len(),
        counterexamples,
        max_asserted_margin: asserted.iter().map(|v| v.measured_decay_margin).reduce(f64::max),
    };
    ctx.out.json("monitor.json", &summary)?;
    println!(
        "monitor: {} evaluated, {} asserted, {} counterexamples at c5 = {}",
        summary.evaluated, summary.asserted, counterexamples, params.c5
    );
    Ok(status)
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    status: Status,
    checks: &'a [Check],
}

/// Relative L² distance of the Taylor–Green run from `u₀e^{−2νt}` at `t_end`.
pub fn taylor_green_error(n: usize, viscosity: f64, dt: f64, t_end: f64) -> Result<f64, scalesep::Error> {
    let grid = GridSpec::periodic(2, n, viscosity)?;
    let tg = random::taylor_green(&grid)?;
    let traj = Solver::new(&grid, SolverConfig::new(dt, t_end), scalesep::Dynamics::NavierStokes)?.run(&tg)?;
    let exact = tg.scale((-2.0 * viscosity * t_end).exp());
    Ok((traj.last().sub(&exact)?.l2_norm_sq() / tg.l2_norm_sq()).sqrt())
}

/// Largest energy-balance residual of a random-data run.
pub fn energy_balance_residual(dim: usize, n: usize, viscosity: f64, amplitude: f64, seed: u64) -> Result<f64, scalesep::Error> {
    let grid = GridSpec::periodic(dim, n, viscosity)?;
    let u0 = random::divergence_free(&grid, 1.0, 6.0, &mut random::rng(seed))?.scale(amplitude);
    let traj = Solver::new(&grid, SolverConfig::new(2e-3, 0.2).with_stride(5), scalesep::Dynamics::NavierStokes)?.run(&u0)?;
    Ok(energy_balance_check(&traj)?.max_residual)
}

fn validate_solver(ctx: &Context<'_>) -> Result<Status, CliError> {
    let v = &ctx.manifest.validate;
    let started = Instant::now();
    let tg = taylor_green_error(v.tg_n, v.tg_viscosity, v.tg_dt, v.tg_t_end)?;
    info!("Taylor-Green run took {:.1?}", started.elapsed());
    let amp = ctx.manifest.initial.amplitude;
    let checks = vec![
        Check::new("taylor-green-relative-l2", tg, v.tg_tolerance),
        Check::new(
            "energy-balance-2d",
            energy_balance_residual(2, 64, v.tg_viscosity, amp, ctx.manifest.seed)?,
            v.energy_tolerance,
        ),
        Check::new(
            "energy-balance-3d",
            energy_balance_residual(3, 32, v.tg_viscosity, amp, ctx.manifest.seed.wrapping_add(1))?,
            v.energy_tolerance,
        ),
    ];
    for c in &checks {
        println!("{:<26} {:e} <= {:e}  {}", c.name, c.value, c.tolerance, if c.passed { "ok" } else { "BREACH" });
    }
    let status = if checks.iter().all(|c| c.passed) { Status::Pass } else { Status::Breach };
    ctx.out.json("validation.json", &ValidationReport { status, checks: &checks })?;
    Ok(status)
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    suites: &'a [SuiteReport],
    existence: &'a [scalesep::harness::sweeps::ExistenceTimeSample],
}

fn calibrate_cmd(ctx: &Context<'_>) -> Result<Status, CliError> {
    let m = ctx.manifest;
    let l = &m.lemmas;
    let base = CalibrationPlan::standard(m.seed);
    let plan = CalibrationPlan {
        decay: DecayCorpusConfig { count: l.count, ..base.decay.clone() },
        physical: PhysicalCorpusConfig {
            count: l.physical_count,
            ..base.physical.clone()
        },
        sweep_count: l.sweep_count,
        bilinear_count: l.bilinear_count,
        existence_per_amplitude: l.existence_per_amplitude,
        ..base
    };
    let run = calibrate(&plan)?;
    // The stamped copy loads as a ledger: unknown fields are ignored.
    ctx.out.json("calibration.json", &run.ledger)?;
    ctx.out.json(
        "calibration_report.json",
        &CalibrationReport {
            suites: &run.suites,
            existence: &run.existence,
        },
    )?;
    let c = &run.ledger.constants;
    println!(
        "calibrated {}: kappa_freq {} kappa_disc {} C0 {} c5 {} K_bern {:.4} C_poinc {:.4} K_I {:.4} C_tsai {:.4} C_B {:.4}",
        run.ledger.version,
        c.kappa_freq.value,
        c.kappa_disc.value,
        c.c0.value,
        c.c5.value,
        c.k_bern.value,
        c.c_poinc.value,
        c.k_i.value,
        c.c_tsai.value,
        c.c_b.value
    );
    Ok(Status::Pass)
}
