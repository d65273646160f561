use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("feature matrix has {rows} rows, expected {expected}")]
    RowCountMismatch { rows: usize, expected: usize },

    #[error("label vector has {len} entries, expected {expected}")]
    LabelCountMismatch { len: usize, expected: usize },

    #[error("label at node {index} is {value}, expected 0 or 1")]
    InvalidLabel { index: usize, value: u8 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge for n = {n} within {iterations} iterations")]
    EigenNoConvergence { n: usize, iterations: usize },

    #[error("haar shift {k} out of range for {bins} bins")]
    ShiftOutOfRange { k: usize, bins: usize },

    #[error("spectral value {0} outside [0, 2]")]
    SpectrumOutOfRange(f64),

    #[error("target function is not finite at node {0}")]
    NonFiniteTarget(f64),

    #[error("{dim}x{dim} matrix is not positive definite")]
    NotPositiveDefinite { dim: usize },

    #[error("non-finite {what} in {tensor}")]
    NonFinite { what: &'static str, tensor: String },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("empty node set")]
    EmptySet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
