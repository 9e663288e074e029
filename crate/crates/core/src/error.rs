use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("operation requires the {expected} strategy, got {actual}")]
    StrategyMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("partition enumeration of k={k} exceeds the cap of {cap}; use the convolution path")]
    PartitionCap { k: usize, cap: usize },

    #[error("no threshold in [0, {budget}) keeps the tail probability below alpha={alpha}")]
    Infeasible { alpha: f64, budget: u64 },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("spec line {line}: {msg}")]
    Spec { line: usize, msg: String },

    #[error("I/O error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse CSV {}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
