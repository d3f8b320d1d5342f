//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use scalesep::field::norm;
use scalesep::harness::lemmas::{
    frequency_decay_corpus, lattice_decay_corpus, physical_decay_corpus, DecayCorpusConfig, PhysicalCorpusConfig,
};
use scalesep::harness::matrix::{build_matrix, evaluate_matrix, MatrixConfig, MatrixScales};
use scalesep::heat_flow::gaussian_convolve_oracle;
use scalesep::lab::growth::fit_growth_regimes;
use scalesep::lab::self_similar::{ss_band_decay_check, SelfSimilarProfile};
use scalesep::lab::twin::{error_energy_trace, run_twin};
use scalesep::{
    heat_evolve, random, BandSystem, CalibrationLedger, CubeLattice, GridSpec, PerturbationSpec,
    PhysicalField, PredictabilityParams, Scale, SolverConfig, SuiteReport,
};
use scalesep_cli::commands::{energy_balance_residual, taylor_green_error};

const SEED: u64 = 2024;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn suite_line(s: &SuiteReport) -> String {
    format!(
        "{} {} pass {} fail {} n/a, min margin {:.3e}",
        s.name,
        s.pass,
        s.fail,
        s.not_applicable,
        s.min_margin.unwrap_or(f64::NAN)
    )
}

fn taylor_green() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let started = Instant::now();
    let err = pool.install(|| taylor_green_error(64, 0.1, 1e-3, 1.0))?;
    let elapsed = started.elapsed();
    Ok((
        err <= 1e-6 && elapsed <= Duration::from_secs(30),
        format!("relative L2 error {err:.2e}, {elapsed:.1?} on one thread"),
    ))
}

fn energy_balance() -> Outcome {
    let two = energy_balance_residual(2, 64, 0.1, 1.0, SEED)?;
    let three = energy_balance_residual(3, 32, 0.1, 1.0, SEED + 1)?;
    Ok((
        two <= 1e-4 && three <= 1e-4,
        format!("max relative residual 2D {two:.2e}, 3D {three:.2e}"),
    ))
}

/// Sum of compactly supported C^∞ bumps near the box centre.
fn compact_cluster(grid: &GridSpec, rng: &mut random::CorpusRng) -> PhysicalField {
    let mid = 0.5 * grid.period();
    let mut acc = PhysicalField::zeros(*grid, grid.dim());
    for _ in 0..rng.random_range(1..=4) {
        let center = [mid + rng.random_range(-1.0..1.0), mid + rng.random_range(-1.0..1.0), 0.0];
        let radius = rng.random_range(1.0..2.0);
        let dir = random::random_direction(grid.dim(), rng);
        acc = acc.add(&random::compact_bump(grid, center, radius, dir)).expect("same grid");
    }
    acc
}

fn heat_dual_path() -> Outcome {
    // The oracle needs √t ≤ period/16, so t = 0.2 calls for a box wider than 2π.
    let grid = GridSpec::new(2, 128, 8.0, 1.0)?;
    let mut rng = random::rng(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let f = compact_cluster(&grid, &mut rng);
        let spectral = f.to_spectral()?;
        for t in [0.01, 0.05, 0.2] {
            let a = heat_evolve(&spectral, t, 1.0).to_physical();
            let b = gaussian_convolve_oracle(&f, t)?;
            worst = worst.max(norm(&a.sub(&b)?, 2.0)? / norm(&b, 2.0)?);
        }
    }
    Ok((worst <= 1e-8, format!("worst relative L2 gap {worst:.2e} over 150 cases")))
}

fn frequency_decay(ledger: &CalibrationLedger) -> Outcome {
    let kappa = ledger.constants.kappa_freq.value;
    let (rep, _) = frequency_decay_corpus(&DecayCorpusConfig::standard(SEED), kappa)?;
    Ok((rep.passed(), format!("kappa_freq {kappa}: {}", suite_line(&rep))))
}

fn lattice_and_physical(ledger: &CalibrationLedger) -> Outcome {
    let c = &ledger.constants;
    let (lat, _) = lattice_decay_corpus(&DecayCorpusConfig::standard(SEED), c.kappa_disc.value)?;
    let (phys, _) = physical_decay_corpus(&PhysicalCorpusConfig::standard(SEED), c.c0.value)?;
    Ok((
        lat.passed() && phys.passed(),
        format!(
            "kappa_disc {}: {}; C0 {}: {}",
            c.kappa_disc.value,
            suite_line(&lat),
            c.c0.value,
            suite_line(&phys)
        ),
    ))
}

fn predictability_matrix(ledger: &CalibrationLedger) -> Outcome {
    let c = &ledger.constants;
    let runs = build_matrix(&MatrixConfig::standard(SEED))?;
    let params = PredictabilityParams::new(c.c5.value, c.decay_rate.value)?;
    let (rep, verdicts) = evaluate_matrix(&runs, &MatrixScales::for_runs(&runs)?, &params)?;
    let asserted: Vec<_> = verdicts.iter().filter(|v| v.verdict.decay_asserted).collect();
    let bands = asserted.iter().filter(|v| matches!(v.verdict.scale, Scale::Band { .. })).count();
    let lattices = asserted.len() - bands;
    let fails = asserted.iter().filter(|v| v.verdict.is_counterexample()).count();
    Ok((
        asserted.len() >= 200 && bands > 0 && lattices > 0 && fails == 0,
        format!(
            "c5 {}: {} asserted ({bands} band, {lattices} lattice), {fails} non-negative margins; {}",
            c.c5.value,
            asserted.len(),
            suite_line(&rep)
        ),
    ))
}

fn growth_fits() -> Outcome {
    let t: Vec<f64> = (1..=64).map(|i| i as f64 * 0.05).collect();
    let series = |f: fn(f64) -> f64| t.iter().map(|&x| f(x)).collect::<Vec<_>>();
    let lyapunov = fit_growth_regimes(&t, &series(|x| (2.0 * x).exp()))?.lyapunov();
    let rate = fit_growth_regimes(&t, &series(|x| 3.0 * x))?.linear_rate();
    let exponent = fit_growth_regimes(&t, &series(f64::sqrt))?.power_exponent();
    let planted = (lyapunov - 2.0).abs() <= 0.01 && (rate - 3.0).abs() <= 0.01 && (exponent - 0.5).abs() <= 0.02;

    // Band 8 spans |k| ∈ [192, 384]; n = 1024 keeps [192, 341] after dealiasing.
    let grid = GridSpec::periodic(2, 1024, 1e-5)?;
    let u0 = random::taylor_green(&grid)?;
    let spec = PerturbationSpec {
        amplitude: 1e-6,
        band: 8,
        seed: SEED,
    };
    let twin = run_twin(&u0, spec, SolverConfig::new(3e-3, 0.048))?;
    let trace = error_energy_trace(&twin, 0.1);
    let fit = fit_growth_regimes(&trace.times, &trace.error_energy)?;
    let early = fit.exponential;
    Ok((
        planted && early.r2 >= 0.99,
        format!(
            "planted L {lyapunov:.4}, rate {rate:.4}, exponent {exponent:.4}; \
             band-8 twin early window L {:.3} with R2 {:.5} over {} samples",
            early.slope,
            early.r2,
            early.end - early.start
        ),
    ))
}

fn self_similar_refinement() -> Outcome {
    let profile = SelfSimilarProfile::synthesize(2, 0, 2, 0.25, SEED)?;
    let js = [1, 2, 3, 4];
    let ts = [1.0, 0.25, 0.0625, 0.015625];
    let coarse = ss_band_decay_check(&profile, &GridSpec::periodic(2, 128, 1.0)?, &js, &ts, 4)?;
    let fine = ss_band_decay_check(&profile, &GridSpec::periodic(2, 256, 1.0)?, &js, &ts, 4)?;
    let (a, b) = (coarse.empirical_constant, fine.empirical_constant);
    let change = (b - a).abs() / a;
    Ok((
        a.is_finite() && b > 0.0 && b.is_finite() && change <= 0.1 && coarse.flagged == 0,
        format!("sup ratio {a:.6e} at n=128, {b:.6e} at n=256, change {:.2}%", 100.0 * change),
    ))
}

fn structural_invariants() -> Outcome {
    let started = Instant::now();
    let mut worst = [0.0f64; 6];
    let mut bern: f64 = 0.0;
    for (i, (dim, n)) in [(2, 64), (2, 128), (3, 32)].into_iter().enumerate() {
        let grid = GridSpec::periodic(dim, n, 1.0)?;
        let bands = BandSystem::new(&grid)?;
        worst[0] = worst[0].max(bands.partition_residual());
        let mut rng = random::rng(SEED + i as u64);
        let f = random::band_limited(&grid, dim, 0.0, n as f64 / 3.0, &mut rng)?;
        let scale = f.l2_norm_sq().sqrt();

        let p = f.leray_project()?;
        worst[1] = worst[1].max(p.sub(&p.leray_project()?)?.l2_norm_sq().sqrt() / scale);
        let grad = random::band_limited(&grid, 1, 1.0, 8.0, &mut rng)?.gradient();
        worst[1] = worst[1].max(grad.leray_project()?.l2_norm_sq().sqrt() / grad.l2_norm_sq().sqrt());

        let once = heat_evolve(&f, 0.03, 1.0);
        let twice = heat_evolve(&heat_evolve(&f, 0.01, 1.0), 0.02, 1.0);
        worst[2] = worst[2].max(once.sub(&twice)?.l2_norm_sq().sqrt() / scale);

        let phys = f.to_physical();
        let lattice = CubeLattice::new(&grid, 8.0 * grid.spacing(), false)?;
        let jh = lattice.interpolant_jh(&phys)?;
        for q in [2.0, f64::INFINITY] {
            worst[3] = worst[3].max(norm(&jh, q)? / norm(&phys, q)? - 1.0);
        }
        worst[4] = worst[4].max(norm(&lattice.interpolant_jh(&jh)?.sub(&jh)?, f64::INFINITY)? / norm(&jh, f64::INFINITY)?);

        let (lo, hi) = bands.band_range();
        for j in lo..=hi {
            for p in [2.0, 4.0, f64::INFINITY] {
                let r = bands.bernstein_check(&f, j, p, p)?;
                if !r.vacuous {
                    bern = bern.max(r.gradient_ratio);
                }
            }
        }
        let physical_sq = norm(&phys, 2.0)?.powi(2);
        worst[5] = worst[5].max((physical_sq - f.l2_norm_sq()).abs() / f.l2_norm_sq());
    }
    let elapsed = started.elapsed();
    let [partition, leray, semigroup, contraction, idempotence, parseval] = worst;
    let ok = partition <= 1e-12
        && leray <= 1e-12
        && semigroup <= 1e-12
        && contraction <= 1e-12
        && idempotence <= 1e-12
        && bern <= 2.0
        && parseval <= 1e-10
        && elapsed <= Duration::from_secs(300);
    Ok((
        ok,
        format!(
            "partition {partition:.1e}, leray {leray:.1e}, semigroup {semigroup:.1e}, \
             J_h growth {contraction:.1e}, J_h idempotence {idempotence:.1e}, bernstein {bern:.3}, \
             parseval {parseval:.1e}, {elapsed:.1?}"
        ),
    ))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let work = tempfile::tempdir()?;
    let manifest = work.path().join("twin.manifest");
    std::fs::write(
        &manifest,
        "command = run-twin\nseed = 9\ngrid.n = 32\ngrid.viscosity = 0.05\n\
         solver.dt = 0.01\nsolver.t_end = 0.2\nsolver.stride = 2\nperturbation.band = 2\n",
    )?;
    let mut trees = Vec::new();
    for run in ["first", "second"] {
        let out = work.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_scalesep"))
            .arg("--manifest")
            .arg(&manifest)
            .arg("--output")
            .arg(&out)
            .env_remove("SCALESEP_LEDGER")
            .output()?
            .status;
        if !matches!(status.code(), Some(0 | 2 | 3)) {
            return Ok((false, format!("{run} run exited with {status}")));
        }
        let mut files = Vec::new();
        collect_files(&out, &mut files)?;
        let mut tree = Vec::new();
        for f in files {
            tree.push((f.strip_prefix(&out)?.to_path_buf(), std::fs::read(&f)?));
        }
        tree.sort();
        trees.push(tree);
    }
    let identical = trees[0] == trees[1];
    let csv_json = trees[0]
        .iter()
        .filter(|(p, _)| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json" | "jsonl")))
        .count();
    Ok((
        identical && csv_json > 0,
        format!("{} files ({csv_json} CSV/JSON) compared byte for byte", trees[0].len()),
    ))
}

fn main() {
    let ledger = CalibrationLedger::embedded();
    let criteria: Vec<Criterion> = vec![
        ("taylor-green validation", Box::new(taylor_green)),
        ("energy balance", Box::new(energy_balance)),
        ("heat dual-path oracle", Box::new(heat_dual_path)),
        ("frequency sparseness decay", Box::new(|| frequency_decay(&ledger))),
        ("lattice and physical decay", Box::new(|| lattice_and_physical(&ledger))),
        ("predictability decay margin", Box::new(|| predictability_matrix(&ledger))),
        ("growth-regime fitter", Box::new(growth_fits)),
        ("self-similar band decay", Box::new(self_similar_refinement)),
        ("structural invariants", Box::new(structural_invariants)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<28} {}  {detail} [{:.1?}]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            started.elapsed()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
