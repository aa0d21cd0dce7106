//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by fitting, prediction, data handling, and verification.
#[derive(Debug, Error)]
pub enum DwdError {
    /// A scalar or structural parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix/vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dataset violates its invariants (labels, finiteness, class presence).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The MM system matrix could not be factorized even after jitter escalation.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// The model has no usable direction (e.g. all-zero coefficient vector).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed (malformed row, non-numeric cell, bad format).
    #[error("parse error: {0}")]
    Parse(String),

    /// A model file was written by an unsupported schema version.
    #[error("unsupported model schema version {found} (this build reads version {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    /// Cross-validation could not be carried out (degenerate folds, bad plan).
    #[error("cross-validation error: {0}")]
    CrossValidation(String),

    /// The reference gradient-descent solver hit its iteration cap.
    #[error("oracle iteration cap exceeded after {0} iterations")]
    OracleIterationCap(usize),
}

pub type Result<T> = std::result::Result<T, DwdError>;
