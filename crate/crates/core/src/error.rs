use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("no numeric score found in response")]
    ParseFailure,

    #[error("score {0} is outside [1, 5]")]
    OutOfRange(f64),

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("non-finite loss in batch")]
    NonFiniteLoss,

    #[error("training diverged at epoch {epoch}, batch {batch} (sample indices {indices:?})")]
    Divergence {
        epoch: usize,
        batch: usize,
        indices: Vec<usize>,
    },

    #[error("edit log does not match text: {0}")]
    EditMismatch(String),

    #[error("client error: {0}")]
    Client(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
