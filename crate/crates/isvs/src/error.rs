//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented domain (non-positive time, zero pixels, ...).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two buffers that must describe the same pixel grid disagree in length.
    #[error("dimension mismatch: {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// A frame stack of one kind was passed where another kind is required.
    #[error("stack kind mismatch: expected {expected}, got {got}")]
    StackKind { expected: &'static str, got: String },

    /// The requested frames do not fit inside the generated field sequence.
    #[error("exposure window overruns the field sequence: need {needed} steps, have {available}")]
    SpanOverflow { needed: usize, available: usize },

    /// Too few samples for the requested statistic.
    #[error("not enough samples: {0}")]
    NotEnoughSamples(String),

    /// A curve has no usable decay to fit.
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    /// The iterative fit did not converge within the iteration cap.
    #[error("fit did not converge after {iterations} iterations (last step {last_step:.3e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    /// Config file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed stack or data file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
