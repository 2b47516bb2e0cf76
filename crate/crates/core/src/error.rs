//! Error types shared by every module in this crate.

use thiserror::Error;

/// Crate-wide error enum. Variants are coarse on purpose: callers dispatch on
/// the kind, the message carries the detail.
#[derive(Debug, Error)]
pub enum SrError {
    /// A dimension is zero, non-integral after a stride computation, or
    /// otherwise unusable.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// Two tensors that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An operation was called with a cache or state it cannot use
    /// (e.g. a backward pass fed an inference-mode cache).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A model or run configuration fails validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An image file could not be decoded.
    #[error("decode error: {0}")]
    Decode(String),

    /// A dataset directory yields no usable train/val split.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// A checkpoint file is malformed (bad magic, version, or layout).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A benchmark method name is not recognized.
    #[error("unknown method: {0}")]
    UnknownMethod(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SrError>;
