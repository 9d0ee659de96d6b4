//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two operands (or an operand and a model) do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A dense tensor would exceed the configured element cap.
    #[error("tensor with {elements} elements exceeds the element cap of {cap}")]
    Capacity { elements: u128, cap: usize },

    /// Input that cannot be processed (zero vector, empty token list, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Index outside the valid range of a vector or tensor mode.
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// Caller passed an argument that violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A file could not be loaded or yielded no usable content.
    #[error("load error: {0}")]
    Load(String),

    /// A NaN or infinity appeared where a finite value is required.
    /// The message names the offending parameter block or operand.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Checkpoint file is corrupt, truncated, or of an unknown version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
