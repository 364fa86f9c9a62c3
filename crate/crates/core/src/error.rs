//! Error type shared by every module of the toolkit.

use std::path::PathBuf;
use thiserror::Error;

/// Failure modes of toolkit operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data is malformed, for example non-finite samples.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A scalar parameter lies outside its admissible range.
    #[error("parameter out of range: {0}")]
    Parameter(String),
    /// Two objects live on different grids or have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A construction could not satisfy its defining identity.
    #[error("construction failed: {0}")]
    Construction(String),
    /// The grid or quadrature is too coarse for the requested computation.
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    /// The direction set leaves the reproducing denominator too small.
    #[error("insufficient directions: {0}")]
    InsufficientDirections(String),
    /// A tabulated symbol has no slice at a frequency that is needed.
    #[error("symbol table does not cover frequency {0:?}")]
    Coverage(Vec<f64>),
    /// An input has (numerically) zero norm where a ratio is required.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// A binary or JSON file does not follow its format.
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    /// Reading or writing a file failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}

/// Checks `lo < x < hi` (open interval) and reports `name` otherwise.
pub(crate) fn check_open(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x > lo && x < hi {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {x} must lie in ({lo}, {hi})")))
    }
}

/// Checks that an exponent `p` lies strictly between 1 and infinity.
pub(crate) fn check_p(p: f64) -> Result<()> {
    check_open("p", p, 1.0, f64::INFINITY)
}
