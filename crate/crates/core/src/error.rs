//! Error types shared across the modeling and simulation layers.

use thiserror::Error;

/// Errors produced by geometry construction, filtering, regression, and
/// the optimization loop.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an out-of-contract argument.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A sample contained NaN or an infinity.
    #[error("non-finite sample value")]
    NonFiniteSample,

    /// The drag force balance could not be inverted reliably.
    #[error("numerical singularity in force balance (condition number {cond:.3e})")]
    SingularForceBalance { cond: f64 },

    /// Prediction was requested from a bank with at least one window that
    /// has never been updated.
    #[error("model not fitted: phase window {window} has received no samples")]
    UnfittedWindow { window: usize },

    /// A regression window was underdetermined.
    #[error("rank-deficient regression in phase window {window}: {rows} rows for {cols} unknowns")]
    RankDeficient {
        window: usize,
        rows: usize,
        cols: usize,
    },

    /// The confidence metric denominator is zero, so the ratio carries no
    /// information.
    #[error("degenerate confidence metric: baseline error accumulator is zero")]
    DegenerateMetric,

    /// Malformed CSV input.
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    /// Snapshot (de)serialization failure.
    #[error("snapshot format error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
