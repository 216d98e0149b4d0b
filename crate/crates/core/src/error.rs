use thiserror::Error;

/// Errors surfaced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("phonon truncation inadequate: {0}")]
    Truncation(String),
    #[error("parity fit needs at least {min} phase points, got {got}")]
    FitRefused { min: usize, got: usize },
    #[error("context {{{i},{j}}} missing from dataset")]
    MissingContext { i: usize, j: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("zero-probability measurement branch")]
    ZeroProbabilityBranch,
    #[error("all repeatability runs were discarded by post-selection")]
    AllRunsDiscarded,
    #[error("zero detuning for {0}")]
    ZeroDetuning(String),
    #[error("standard error is zero while the statistic is away from the bound")]
    ZeroSem,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
