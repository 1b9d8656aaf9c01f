use thiserror::Error;

use crate::units::Dimension;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch {
        expected: Dimension,
        actual: Dimension,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("{what} = {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },

    #[error("spin S = {spin} exceeds the exact-diagonalization cap of {cap}; use the WKB splitting instead")]
    EdCapExceeded { spin: u32, cap: u32 },

    #[error("unknown material '{0}'")]
    UnknownMaterial(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown key '{key}' in section [{section}] (line {line})")]
    UnknownKey {
        section: String,
        key: String,
        line: usize,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by user-supplied input as opposed to a
    /// numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
