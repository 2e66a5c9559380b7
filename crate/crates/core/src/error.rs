//! Crate-wide error type.

use std::fmt;

/// Errors produced by any stage of the pipeline.
#[derive(Debug)]
pub enum Error {
    /// Malformed input text (CSV headers, JSON schemas).
    Format(String),
    /// Structurally valid input with unusable content (non-finite values,
    /// non-uniform timestamps, empty label groups, out-of-range labels).
    Data(String),
    /// Dimension or length mismatch between operands.
    Shape(String),
    /// A signal with no usable oscillation (constant channel, zero variance).
    DegenerateSignal(String),
    /// Request outside supported bounds (e.g. label alignment for K > 6).
    Unsupported(String),
    /// Filesystem failure, with the offending path.
    Io(String, std::io::Error),
    /// Numerical failure (non-convergence, non-finite intermediate).
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::DegenerateSignal(msg) => write!(f, "degenerate signal: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::Io(path, err) => write!(f, "io error on {path}: {err}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(_, err) => Some(err),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<String>, err: std::io::Error) -> Self {
        Error::Io(path.into(), err)
    }
}
