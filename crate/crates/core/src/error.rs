//! Shared error type for all toolkit modules.

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Spectral estimation failed (zero matrix or no convergence).
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// A symmetric system could not be factorized even after jitter.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Invalid configuration or parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A class label is outside the declared range.
    #[error("label out of range: {0}")]
    Label(String),

    /// Input is degenerate for the requested operation (zero vector, empty sequence).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A dataset with no frames or sequences.
    #[error("empty dataset")]
    EmptyDataset,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
