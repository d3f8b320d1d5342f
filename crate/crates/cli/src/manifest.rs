//! Flat `key = value` experiment manifests with dotted namespaces.
//!
//! Every key has a default; the resolved manifest is rendered back to a
//! canonical sorted text whose SHA-256 identifies the experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyLemmas,
    RunTwin,
    Monitor,
    ValidateSolver,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyLemmas => "verify-lemmas",
            Command::RunTwin => "run-twin",
            Command::Monitor => "monitor",
            Command::ValidateSolver => "validate-solver",
            Command::Calibrate => "calibrate",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        [
            Command::VerifyLemmas,
            Command::RunTwin,
            Command::Monitor,
            Command::ValidateSolver,
            Command::Calibrate,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| CliError::Manifest(format!("unknown command `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    TaylorGreen,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub dim: usize,
    pub n: usize,
    pub viscosity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialParams {
    pub kind: InitialKind,
    /// Multiplier of the Taylor–Green field, or `‖u₀‖₂` of random data.
    pub amplitude: f64,
    pub k_lo: f64,
    pub k_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub amplitude: f64,
    pub band: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticParams {
    pub gamma: f64,
    pub eta: f64,
    pub ratio_p: f64,
    pub epsilon2: f64,
    pub epsilon3: f64,
    pub j3_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorParams {
    /// Overrides the ledger's `c5` when set.
    pub c5: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    /// Fields per `γ` of the frequency and lattice corpora.
    pub count: usize,
    pub physical_count: usize,
    pub sweep_count: usize,
    pub bilinear_count: usize,
    pub existence_per_amplitude: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateParams {
    pub tg_n: usize,
    pub tg_viscosity: f64,
    pub tg_dt: f64,
    pub tg_t_end: f64,
    pub tg_tolerance: f64,
    pub energy_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputParams {
    pub snapshots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub seed: u64,
    /// Not part of the run's identity, so left out of the recorded manifest.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    pub grid: GridParams,
    pub solver: SolverParams,
    pub initial: InitialParams,
    pub perturbation: PerturbationParams,
    pub diagnostics: DiagnosticParams,
    pub monitor: MonitorParams,
    pub lemmas: LemmaParams,
    pub validate: ValidateParams,
    pub output: OutputParams,
}

impl Manifest {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            seed: 0,
            output_dir: None,
            grid: GridParams {
                dim: 2,
                n: 64,
                viscosity: 0.1,
            },
            solver: SolverParams {
                dt: 0.01,
                t_end: 1.0,
                stride: 5,
            },
            initial: InitialParams {
                kind: InitialKind::TaylorGreen,
                amplitude: 1.0,
                k_lo: 1.0,
                k_hi: 6.0,
            },
            perturbation: PerturbationParams {
                amplitude: 1e-3,
                band: 3,
            },
            diagnostics: DiagnosticParams {
                gamma: 1.0,
                eta: 1.0,
                ratio_p: f64::INFINITY,
                epsilon2: 0.1,
                epsilon3: 0.5,
                j3_constant: 0.5,
            },
            monitor: MonitorParams { c5: None },
            lemmas: LemmaParams {
                count: 100,
                physical_count: 40,
                sweep_count: 200,
                bilinear_count: 24,
                existence_per_amplitude: 6,
            },
            validate: ValidateParams {
                tg_n: 64,
                tg_viscosity: 0.1,
                tg_dt: 1e-3,
                tg_t_end: 1.0,
                tg_tolerance: 1e-6,
                energy_tolerance: 1e-4,
            },
            output: OutputParams { snapshots: true },
        }
    }

    /// Parses manifest text; `command` is required, everything else defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Manifest(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            check_key(key).map_err(|m| CliError::Manifest(format!("line {}: {m}", lineno + 1)))?;
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Manifest(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let command: Command = entries
            .remove("command")
            .ok_or_else(|| CliError::Manifest("manifest has no `command`".into()))?
            .parse()?;
        let mut m = Self::defaults(command);
        for (k, v) in &entries {
            m.set(k, v)?;
        }
        Ok(m)
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "command" => self.command = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "grid.dim" => self.grid.dim = num(key, value)?,
            "grid.n" => self.grid.n = num(key, value)?,
            "grid.viscosity" => self.grid.viscosity = real(key, value)?,
            "solver.dt" => self.solver.dt = real(key, value)?,
            "solver.t_end" => self.solver.t_end = real(key, value)?,
            "solver.stride" => self.solver.stride = num(key, value)?,
            "initial.kind" => {
                self.initial.kind = match value {
                    "taylor-green" => InitialKind::TaylorGreen,
                    "random" => InitialKind::Random,
                    _ => return Err(CliError::Manifest(format!("initial.kind must be taylor-green or random, got `{value}`"))),
                }
            }
            "initial.amplitude" => self.initial.amplitude = real(key, value)?,
            "initial.k_lo" => self.initial.k_lo = real(key, value)?,
            "initial.k_hi" => self.initial.k_hi = real(key, value)?,
            "perturbation.amplitude" => self.perturbation.amplitude = real(key, value)?,
            "perturbation.band" => self.perturbation.band = num(key, value)?,
            "diagnostics.gamma" => self.diagnostics.gamma = real(key, value)?,
            "diagnostics.eta" => self.diagnostics.eta = real(key, value)?,
            "diagnostics.ratio_p" => self.diagnostics.ratio_p = real(key, value)?,
            "diagnostics.epsilon2" => self.diagnostics.epsilon2 = real(key, value)?,
            "diagnostics.epsilon3" => self.diagnostics.epsilon3 = real(key, value)?,
            "diagnostics.j3_constant" => self.diagnostics.j3_constant = real(key, value)?,
            "monitor.c5" => self.monitor.c5 = if value == "ledger" { None } else { Some(real(key, value)?) },
            "lemmas.count" => self.lemmas.count = num(key, value)?,
            "lemmas.physical_count" => self.lemmas.physical_count = num(key, value)?,
            "lemmas.sweep_count" => self.lemmas.sweep_count = num(key, value)?,
            "lemmas.bilinear_count" => self.lemmas.bilinear_count = num(key, value)?,
            "lemmas.existence_per_amplitude" => self.lemmas.existence_per_amplitude = num(key, value)?,
            "validate.tg_n" => self.validate.tg_n = num(key, value)?,
            "validate.tg_viscosity" => self.validate.tg_viscosity = real(key, value)?,
            "validate.tg_dt" => self.validate.tg_dt = real(key, value)?,
            "validate.tg_t_end" => self.validate.tg_t_end = real(key, value)?,
            "validate.tg_tolerance" => self.validate.tg_tolerance = real(key, value)?,
            "validate.energy_tolerance" => self.validate.energy_tolerance = real(key, value)?,
            "output.snapshots" => self.output.snapshots = boolean(key, value)?,
            _ => return Err(CliError::Manifest(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Sorted `key = value` text of every resolved parameter. The output
    /// directory is excluded: it names where results go, not what they are.
    pub fn canonical(&self) -> String {
        let f = |x: f64| format!("{x:e}");
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("command", self.command.name().into());
        kv.insert("seed", self.seed.to_string());
        kv.insert("grid.dim", self.grid.dim.to_string());
        kv.insert("grid.n", self.grid.n.to_string());
        kv.insert("grid.viscosity", f(self.grid.viscosity));
        kv.insert("solver.dt", f(self.solver.dt));
        kv.insert("solver.t_end", f(self.solver.t_end));
        kv.insert("solver.stride", self.solver.stride.to_string());
        kv.insert(
            "initial.kind",
            match self.initial.kind {
                InitialKind::TaylorGreen => "taylor-green".into(),
                InitialKind::Random => "random".into(),
            },
        );
        kv.insert("initial.amplitude", f(self.initial.amplitude));
        kv.insert("initial.k_lo", f(self.initial.k_lo));
        kv.insert("initial.k_hi", f(self.initial.k_hi));
        kv.insert("perturbation.amplitude", f(self.perturbation.amplitude));
        kv.insert("perturbation.band", self.perturbation.band.to_string());
        kv.insert("diagnostics.gamma", f(self.diagnostics.gamma));
        kv.insert("diagnostics.eta", f(self.diagnostics.eta));
        kv.insert("diagnostics.ratio_p", f(self.diagnostics.ratio_p));
        kv.insert("diagnostics.epsilon2", f(self.diagnostics.epsilon2));
        kv.insert("diagnostics.epsilon3", f(self.diagnostics.epsilon3));
        kv.insert("diagnostics.j3_constant", f(self.diagnostics.j3_constant));
        kv.insert("monitor.c5", self.monitor.c5.map_or("ledger".into(), f));
        kv.insert("lemmas.count", self.lemmas.count.to_string());
        kv.insert("lemmas.physical_count", self.lemmas.physical_count.to_string());
        kv.insert("lemmas.sweep_count", self.lemmas.sweep_count.to_string());
        kv.insert("lemmas.bilinear_count", self.lemmas.bilinear_count.to_string());
        kv.insert("lemmas.existence_per_amplitude", self.lemmas.existence_per_amplitude.to_string());
        kv.insert("validate.tg_n", self.validate.tg_n.to_string());
        kv.insert("validate.tg_viscosity", f(self.validate.tg_viscosity));
        kv.insert("validate.tg_dt", f(self.validate.tg_dt));
        kv.insert("validate.tg_t_end", f(self.validate.tg_t_end));
        kv.insert("validate.tg_tolerance", f(self.validate.tg_tolerance));
        kv.insert("validate.energy_tolerance", f(self.validate.energy_tolerance));
        kv.insert("output.snapshots", self.output.snapshots.to_string());
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn check_key(key: &str) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() > 2 {
        return Err(format!("key `{key}` nests deeper than two levels"));
    }
    let ok = |p: &&str| !p.is_empty() && p.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if !parts.iter().all(ok) {
        return Err(format!("malformed key `{key}`"));
    }
    Ok(())
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Manifest(format!("`{key}` expects an integer, got `{value}`")))
}

fn real(key: &str, value: &str) -> Result<f64, CliError> {
    match value {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => value
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::Manifest(format!("`{key}` expects a number, got `{value}`"))),
    }
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Manifest(format!("`{key}` expects true or false, got `{value}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let m = Manifest::parse("# twin\ncommand = run-twin\nseed = 9\ngrid.n = 32  # small\nperturbation.band = 4\n").unwrap();
        assert_eq!(m.command, Command::RunTwin);
        assert_eq!(m.seed, 9);
        assert_eq!(m.grid.n, 32);
        assert_eq!(m.perturbation.band, 4);
    }

    #[test]
    fn rejects_bad_manifests() {
        for text in [
            "seed = 1",
            "command = fly",
            "command = monitor\ngrid.q = 1",
            "command = monitor\na.b.c = 1",
            "command = monitor\nseed = 1\nseed = 2",
            "command = monitor\ngrid.viscosity = nan",
            "command = monitor\nno equals sign",
        ] {
            assert!(matches!(Manifest::parse(text), Err(CliError::Manifest(_))), "{text}");
        }
    }

    #[test]
    fn hash_ignores_layout_and_output_dir() {
        let a = Manifest::parse("command = monitor\nseed = 3\noutput_dir = /tmp/a").unwrap();
        let b = Manifest::parse("\n\nseed=3\n   command   =   monitor\n").unwrap();
        assert_eq!(a.sha256(), b.sha256());
        let c = Manifest::parse("command = monitor\nseed = 4").unwrap();
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut m = Manifest::parse("command = run-twin\ndiagnostics.ratio_p = inf\nmonitor.c5 = 0.3").unwrap();
        m.output_dir = None;
        let back = Manifest::parse(&m.canonical()).unwrap();
        assert_eq!(back, m);
    }
}
