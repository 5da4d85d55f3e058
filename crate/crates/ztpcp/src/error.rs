//! Error type shared across the crate.

use std::path::PathBuf;

/// Everything that can go wrong while loading data, validating a
/// configuration, or running a chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input file could not be read or an output file could not be written.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A data file line failed to parse (bad token count, non-integer
    /// coordinate, coordinate out of range, duplicate definitions, ...).
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A configuration value is missing, malformed, or inconsistent
    /// (e.g. burn-in not smaller than the iteration count).
    #[error("config error: {0}")]
    Config(String),

    /// A requested operation would exceed an explicit resource budget,
    /// such as dense enumeration of a tensor with too many cells.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A metric is undefined on the given inputs (e.g. ranking metrics
    /// on a single-class test set). Names the metric.
    #[error("undefined metric: {0}")]
    Metric(String),
}

impl Error {
    /// Wrap an I/O error with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Build a parse error for a 1-based line of a data file.
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
