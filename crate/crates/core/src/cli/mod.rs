//! Experiment runner: one subcommand per diagnostic, deterministic outputs and
//! a manifest recording the config hash, library version and summary checks.
//!
//! Exit codes: 0 success, 2 invalid config, 3 numerical guard, 4 I/O failure.

mod config;
mod experiments;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;

pub use config::{
    parse_pairs, validate_config, validate_with_overrides, ConfigError, ExperimentConfig, Format,
    IrSymbol, ProfileSpec, DEFAULT_LAMBDA_GRID, KEYS,
};
pub use experiments::{
    defect_symbol, notiso_inputs, npoint_inputs, run_experiment, Check, Outcome, DEFECT_SHIFT,
    DEFECT_TIME,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    SweepNotiso,
    SweepTranslation,
    SweepMassiveDefect,
    NpointLimit,
    IrSlope,
    SectorPhases,
    Bessel,
    KernelCrosscheck,
    TraceDiagnostics,
    Galerkin,
    NormEquivalence,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::SweepNotiso,
        Experiment::SweepTranslation,
        Experiment::SweepMassiveDefect,
        Experiment::NpointLimit,
        Experiment::IrSlope,
        Experiment::SectorPhases,
        Experiment::Bessel,
        Experiment::KernelCrosscheck,
        Experiment::TraceDiagnostics,
        Experiment::Galerkin,
        Experiment::NormEquivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SweepNotiso => "sweep-notiso",
            Experiment::SweepTranslation => "sweep-translation",
            Experiment::SweepMassiveDefect => "sweep-massive-defect",
            Experiment::NpointLimit => "npoint-limit",
            Experiment::IrSlope => "ir-slope",
            Experiment::SectorPhases => "sector-phases",
            Experiment::Bessel => "bessel",
            Experiment::KernelCrosscheck => "kernel-crosscheck",
            Experiment::TraceDiagnostics => "trace-diagnostics",
            Experiment::Galerkin => "galerkin",
            Experiment::NormEquivalence => "norm-equivalence",
        }
    }

    fn default_grid(self) -> (usize, f64) {
        match self {
            Experiment::SweepNotiso | Experiment::SectorPhases => (4096, 16.0),
            Experiment::IrSlope => (4096, 32.0),
            Experiment::Galerkin => (8192, 4.0),
            _ => (4096, 8.0),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!(
                    "unknown experiment `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

/// Why a run failed, mapped onto the process exit code.
#[derive(Debug)]
pub enum RunError {
    Config(Vec<ConfigError>),
    Guard(Error),
    Io(PathBuf, std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Guard(_) => 3,
            RunError::Io(..) => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(errs) => {
                writeln!(f, "invalid configuration:")?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
            RunError::Guard(e) => write!(f, "{e}"),
            RunError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalGuard { .. } => RunError::Guard(e),
            other => RunError::Config(vec![ConfigError {
                line: None,
                key: "parameters".into(),
                message: other.to_string(),
            }]),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Result of [`run`]: the files written and the manifest.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub data_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Value,
    pub pass: bool,
}

/// Builds the manifest for a finished experiment.
pub fn manifest(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    data_file: &str,
    data: &str,
) -> Value {
    let canonical = cfg.canonical(experiment);
    let checks: Vec<Value> = outcome
        .checks
        .iter()
        .map(
            |c| json!({"name": c.name, "value": c.value, "threshold": c.threshold, "pass": c.pass}),
        )
        .collect();
    json!({
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "experiment": experiment.name(),
        "library_version": crate::VERSION,
        "config": canonical,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "outputs": [{"file": data_file, "sha256": sha256_hex(data.as_bytes())}],
        "summary": {
            "pass": outcome.pass(),
            "checks": checks,
            "details": outcome.summary,
        },
    })
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io(path.to_path_buf(), e))
}

/// Runs a validated configuration and writes `<experiment>.<ext>` and
/// `manifest.json` into the output directory.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<RunReport, RunError> {
    let outcome = run_experiment(experiment, cfg)?;
    let dir = PathBuf::from(&cfg.output);
    std::fs::create_dir_all(&dir).map_err(|e| RunError::Io(dir.clone(), e))?;
    let data = match cfg.format {
        Format::Csv => outcome.csv.clone(),
        Format::Json => {
            serde_json::to_string_pretty(&outcome.json).expect("json values serialize") + "\n"
        }
    };
    let data_file = format!("{}.{}", experiment.name(), cfg.format.extension());
    let data_path = dir.join(&data_file);
    write(&data_path, &data)?;
    let manifest = manifest(experiment, cfg, &outcome, &data_file, &data);
    let manifest_path = dir.join("manifest.json");
    write(
        &manifest_path,
        &(serde_json::to_string_pretty(&manifest).expect("json values serialize") + "\n"),
    )?;
    Ok(RunReport {
        data_path,
        manifest_path,
        manifest,
        pass: outcome.pass(),
    })
}

/// Reads an optional config file, merges flag overrides and validates.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, RunError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| {
            RunError::Config(vec![ConfigError {
                line: None,
                key: "config".into(),
                message: format!("cannot read {}: {e}", p.display()),
            }])
        })?,
        None => String::new(),
    };
    validate_with_overrides(&text, overrides).map_err(RunError::Config)
}
