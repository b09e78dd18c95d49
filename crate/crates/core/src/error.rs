use thiserror::Error;

use crate::train::EpochRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("structure tensor of `{name}` has a non-finite coefficient at ({m}, {n}, {k})")]
    NonFiniteCoefficient {
        name: String,
        m: usize,
        n: usize,
        k: usize,
    },

    #[error("a product named `{0}` is already registered")]
    DuplicateProduct(String),

    #[error("unknown product `{0}`")]
    UnknownProduct(String),

    #[error("non-finite value in layer {layer} during the forward pass")]
    NumericOverflow { layer: usize },

    #[error("non-finite gradient in layer {layer} ({kind})")]
    NonFiniteGradient { layer: usize, kind: &'static str },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged {
        epoch: usize,
        history: Vec<EpochRecord>,
    },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: &[usize], found: &[usize]) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}
