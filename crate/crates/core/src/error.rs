use thiserror::Error;

use crate::driver::RunRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("model initialisation failed: {0}")]
    ModelInit(String),

    #[error("solve failed for realization {seed:#018x}: {message}")]
    Solve { seed: u64, message: String },

    /// The level loop reached its cap without satisfying the termination test.
    /// The partially completed record is kept for diagnostics.
    #[error("no convergence: level cap {level_cap} reached")]
    NonConvergence {
        level_cap: usize,
        record: Box<RunRecord>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn insufficient(msg: impl Into<String>) -> Error {
    Error::InsufficientSamples(msg.into())
}
