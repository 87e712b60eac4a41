use alloc::string::String;
use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Tensor or matrix extents do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },
    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A non-finite value appeared where finite input is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// Model weights disagree with their architecture descriptor.
    #[error("model error: {0}")]
    Model(String),
    /// A wavelet pyramid is internally inconsistent.
    #[error("pyramid structure error: {0}")]
    Structure(String),
    /// Training data problems (empty dataset, too few images for a batch).
    #[error("data error: {0}")]
    Data(String),
    /// Training diverged.
    #[error("training aborted at epoch {epoch}, step {step}: {reason}")]
    TrainingAborted {
        epoch: usize,
        step: usize,
        reason: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_err(
    context: &'static str,
    expected: impl Into<String>,
    actual: impl Into<String>,
) -> Error {
    Error::Dimension {
        context,
        expected: expected.into(),
        actual: actual.into(),
    }
}
