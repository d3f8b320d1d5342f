use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use scalesep_cli::commands::{self, Context};
use scalesep_cli::output::{OutputDir, Stamp};
use scalesep_cli::{ledger_source, load_ledger, CliError, Manifest, Status, LEDGER_ENV};

/// Navier–Stokes separation laboratory.
#[derive(Debug, Parser)]
#[command(name = "scalesep", version)]
struct Args {
    /// Experiment manifest (`key = value` lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; overrides `output_dir` in the manifest.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `seed` in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Calibration ledger; the SCALESEP_LEDGER variable takes precedence.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

fn execute(args: &Args) -> Result<Status, CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Manifest(format!("--threads: {e}")))?;
    }
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(CliError::io(format!("reading manifest {}", args.manifest.display())))?;
    let mut manifest = Manifest::parse(&text)?;
    if let Some(seed) = args.seed {
        manifest.seed = seed;
    }
    if let Some(out) = &args.output {
        manifest.output_dir = Some(out.clone());
    }
    let env = std::env::var(LEDGER_ENV).ok();
    let ledger = load_ledger(ledger_source(args.ledger.as_deref(), env.as_deref()).as_deref())?;
    let root = manifest.output_dir.clone().unwrap_or_else(|| PathBuf::from("scalesep-out"));
    let out = OutputDir::create(
        &root,
        Stamp {
            manifest_sha256: manifest.sha256(),
            ledger_version: match manifest.command {
                scalesep_cli::Command::Calibrate => scalesep::harness::calibrate::ledger_version(manifest.seed),
                _ => ledger.version.clone(),
            },
        },
    )?;
    commands::run(&Context {
        manifest: &manifest,
        ledger: &ledger,
        out: &out,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
