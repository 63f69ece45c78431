//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the forecasting stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix product dimension mismatch: ({a_rows}, {a_cols}) x ({b_rows}, {b_cols})")]
    MatmulShape {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },

    #[error("{context}: expected length {expected}, found {found}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix data length {len} does not equal {rows} x {cols}")]
    MatrixSize { rows: usize, cols: usize, len: usize },

    #[error("{context}: non-finite value {value} at index {index}")]
    NonFinite {
        context: &'static str,
        index: usize,
        value: f64,
    },

    #[error("probability out of [0, 1] at index {index}: {value}")]
    ProbabilityRange { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance too large for exact enumeration: {n_visible} visible + {n_hidden} hidden units exceeds {max}")]
    InstanceTooLarge {
        n_visible: usize,
        n_hidden: usize,
        max: usize,
    },

    /// Raised by a single update step; training loops wrap it into
    /// [`Error::Diverged`] with the position in the schedule.
    #[error("non-finite {what} after update step")]
    NonFiniteUpdate { what: &'static str },

    #[error("training diverged: non-finite {what} at epoch {epoch}, batch {batch}")]
    Diverged {
        what: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{context}: index {index} out of range 0..{bound}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
