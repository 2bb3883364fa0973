//! Error types shared across the crate.

use std::path::PathBuf;

/// Invalid configuration, caught before a run starts.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown environment {0:?} (expected `pendulum` or `pointreach`)")]
    UnknownEnv(String),
    #[error("unknown method {0:?} (expected `sac`, `redq`, or `dea`)")]
    UnknownMethod(String),
    #[error("unknown regime {0:?} (expected `interactive`, `sample-efficient`, `desk-interactive`, or `desk-sample-efficient`)")]
    UnknownRegime(String),
    #[error("invalid value for {field}: {reason}")]
    InvalidValue { field: &'static str, reason: String },
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config {path}:\n{message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid seed list {0:?} (expected e.g. `1..5` or `1,2,3`)")]
    BadSeedList(String),
}

/// Failure during a training run.
#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    /// A loss, target, or parameter became non-finite. The run is aborted
    /// rather than silently clipped; the step index points at the offending
    /// environment interaction.
    #[error("non-finite {context} at environment step {step}; aborting run")]
    NonFinite { step: usize, context: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("failed to write artifact {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failure while assembling a report from run artifacts.
#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("input {0} contains neither summary.csv nor metrics.csv")]
    NotARunDir(PathBuf),
    #[error("no usable runs found in the inputs")]
    Empty,
    #[error("inconsistent env/method sets across inputs: {0}")]
    Inconsistent(String),
    #[error("malformed {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
