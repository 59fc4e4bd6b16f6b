//! Failure classification for the command-line tool.
//!
//! Every failure is reported as a single machine-readable stderr line,
//! `error[<category>]: <message>`, and the category fixes the process exit
//! code: `config` exits 2, `data` exits 3, `diverged` exits 4.

use std::fmt;

use trajnet::data::DataError;
use trajnet::eval::EvalError;
use trajnet::model::ModelError;
use trajnet::skeleton::SkeletonError;
use trajnet::training::TrainError;

/// A classified subcommand failure.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, an invalid configuration file, or settings that contradict
    /// each other or a checkpoint.
    Config(String),
    /// Unreadable or malformed data files, or artifacts (manifest, sequence,
    /// checkpoint) that do not fit together.
    Data(String),
    /// Optimization left the finite regime.
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Diverged(_) => "diverged",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Diverged(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> CliError {
        match e {
            // Semantic validation of configuration values (synth parameters,
            // window geometry) is a configuration problem, not a file problem.
            DataError::Config { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<SkeletonError> for CliError {
    fn from(e: SkeletonError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        match e {
            TrainError::Diverged { .. } => CliError::Diverged(e.to_string()),
            TrainError::BadConfig { .. } => CliError::Config(e.to_string()),
            TrainError::Model(m) => CliError::from(m),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Wraps an I/O failure on `path` as a data error.
pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
