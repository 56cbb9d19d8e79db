use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by tensor operations, network construction and training steps.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: axis {axis} mismatch, expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        axis: usize,
        expected: usize,
        found: usize,
    },
    #[error("{op}: expected rank {expected}, found shape {found:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        found: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("backward: loss must be a scalar, found shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("build failed at row {row}: {msg}")]
    Build { row: usize, msg: String },
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            op,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
