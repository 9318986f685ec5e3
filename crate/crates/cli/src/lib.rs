//! Config-driven experiment runner.
//!
//! [`run`] reads a JSON config, runs its task and writes `report.json` plus
//! CSV tables to the output directory. Exit codes: 0 on success, 1 for
//! config or input errors, 2 for numeric failures (solver breakdown, CFL
//! violation) and 3 when a check exceeds its tolerance.

pub mod config;
pub mod inputs;
pub mod report;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use config::{parse_config, validate_config, Diagnostic, LoadedConfig};
use inputs::Inputs;
use report::Report;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("check failed: {}", .0.join("; "))]
    Check(Vec<String>),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Invalid(_) | RunError::Io(_) => 1,
            RunError::Numeric(_) => 2,
            RunError::Check(_) => 3,
        }
    }

    pub(crate) fn config(loaded: &LoadedConfig, key: &str, message: String) -> Self {
        let d = Diagnostic {
            line: loaded.line_of(key),
            column: None,
            message,
        };
        RunError::Config(format!("{}: {d}", loaded.path.display()))
    }

    pub(crate) fn missing(loaded: &LoadedConfig, key: &str) -> Self {
        Self::config(loaded, "task", format!("task `{}` requires `{key}`", loaded.config.task.name()))
    }

    /// Failure while loading the inputs named by `key`.
    pub(crate) fn input(loaded: &LoadedConfig, key: &str, e: dynrisk::Error) -> Self {
        Self::from_core(loaded, key, e)
    }

    /// Numeric failures keep their own class; anything else is blamed on the
    /// input named by `key`.
    pub(crate) fn from_core(loaded: &LoadedConfig, key: &str, e: dynrisk::Error) -> Self {
        match e {
            dynrisk::Error::Cfl { .. } => RunError::Numeric(format!("CFL condition violated: {e}")),
            e if e.is_numeric() => RunError::Numeric(e.to_string()),
            e => Self::config(loaded, key, e.to_string()),
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: Report,
    pub out_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path).map_err(|d| RunError::Config(format!("{}: {d}", path.display())))
}

/// Parses and validates without running.
pub fn validate(path: &Path) -> Result<Vec<Diagnostic>, RunError> {
    Ok(validate_config(&load(path)?))
}

/// Runs the experiment. On a failed check the report is still written and
/// the error lists the failures.
pub fn run(path: &Path, overrides: &Overrides) -> Result<RunSummary, RunError> {
    let loaded = load(path)?;
    let diagnostics = validate_config(&loaded);
    if !diagnostics.is_empty() {
        return Err(RunError::Invalid(diagnostics));
    }
    let seed = overrides.seed.unwrap_or(loaded.config.seed);
    let mut inputs = Inputs::new(&loaded);
    let outcome = tasks::run(&loaded, &mut inputs, seed)?;
    let report = Report::new(loaded.config.task.name(), seed, inputs.digest(), &outcome);
    let out_dir = overrides.out.clone().unwrap_or_else(|| loaded.out_dir());
    report::write(&out_dir, &report, &outcome.tables)?;
    if !report.passed {
        return Err(RunError::Check(report.failures.clone()));
    }
    Ok(RunSummary { report, out_dir })
}
