//! Command implementations behind the `hyperpmg` binary: single solves,
//! accuracy and throughput studies, and the verification table.

pub mod config;
pub mod solve;
pub mod study;
pub mod verify;

use std::fmt;
use std::io::Write;
use std::path::Path;

pub use config::{ConfigError, ProblemConfig, SolverKind};
pub use solve::{build_operator, run_solve, SolveOutcome};
pub use study::{run_accuracy_study, run_performance_study, StudyRow};
pub use verify::{run_verify, VerifyCheck};

/// Failure of a CLI command, mapped onto distinct exit codes.
#[derive(Debug)]
pub enum HarnessError {
    Config(ConfigError),
    Io(String),
    Solver { phase: String, error: crate::Error },
    /// Number of failed verification checks.
    Verification(usize),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver { .. } | HarnessError::Verification(_) => 1,
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) => 3,
        }
    }

    pub(crate) fn solver(phase: &str, error: crate::Error) -> Self {
        // bad arguments at setup come from the configuration
        let from_config = matches!(
            error,
            crate::Error::InvalidArgument(_) | crate::Error::IncompressibleUnsupported
        );
        if phase == "setup" && from_config {
            return HarnessError::Config(ConfigError { line: None, key: None, message: error.to_string() });
        }
        HarnessError::Solver { phase: phase.to_string(), error }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(e) => write!(f, "configuration error: {e}"),
            HarnessError::Io(e) => write!(f, "I/O error: {e}"),
            HarnessError::Solver { phase, error } => write!(f, "solver error during {phase}: {error}"),
            HarnessError::Verification(n) => write!(f, "{n} verification checks failed"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        HarnessError::Config(e)
    }
}

pub(crate) fn io_err(path: &Path, e: impl fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Reads a configuration file.
pub fn read_config(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Timing columns are written as 0 so output files compare byte for byte.
    pub deterministic: bool,
}

pub(crate) fn write_rows(path: &Path, rows: &[StudyRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(StudyRow::HEADER).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r.fields()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}
