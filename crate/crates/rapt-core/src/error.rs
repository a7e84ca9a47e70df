use alloc::string::String;
use thiserror::Error;

/// Errors raised by case-base construction, retrieval, adaptation,
/// thresholding, and metric computation.
///
/// All dimension and label validation happens when a case base is built or
/// extended; a successfully constructed [`crate::CaseBase`] never produces
/// dimension errors downstream for queries of the right shape.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// No records were supplied where at least one is required.
    #[error("empty input: at least one record is required")]
    EmptyInput,
    /// A vector length disagrees with the expected dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    /// A case id is already present in the case base.
    #[error("duplicate case id `{0}`")]
    DuplicateId(String),
    /// A label name appears twice in a vocabulary.
    #[error("duplicate label name `{0}`")]
    DuplicateLabel(String),
    /// A stored case embedding has zero norm and cannot be compared.
    #[error("case `{0}` has a zero-norm embedding")]
    ZeroNormEmbedding(String),
    /// A query or argument vector has zero norm.
    #[error("zero-norm vector in similarity computation")]
    ZeroNormVector,
    /// A case label value is outside {0, 1}.
    #[error("case `{id}` has non-binary label value {value}")]
    NonBinaryLabel { id: String, value: u8 },
    /// Retrieval found no eligible cases.
    #[error("case base has no retrievable cases")]
    EmptyCaseBase,
    /// An operation that needs neighbors received none.
    #[error("neighborhood is empty")]
    EmptyNeighborhood,
    /// Every retrieved neighbor has non-positive similarity weight.
    #[error("no usable neighbors: every weight is non-positive")]
    NoUsableNeighbors,
    /// Prediction/truth matrices disagree in row count or row length.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    /// A prediction/truth matrix entry is outside {0, 1}.
    #[error("non-binary matrix entry {0}")]
    NonBinaryEntry(u8),
    /// Neighborhood entries were supplied out of descending-weight order.
    #[error("neighborhood weights must be non-increasing")]
    UnsortedNeighborhood,
}

impl Error {
    /// Stable machine-readable identifier for this error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EmptyInput",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DuplicateId(_) => "DuplicateId",
            Error::DuplicateLabel(_) => "DuplicateLabel",
            Error::ZeroNormEmbedding(_) => "ZeroNormEmbedding",
            Error::ZeroNormVector => "ZeroNormVector",
            Error::NonBinaryLabel { .. } => "NonBinaryLabel",
            Error::EmptyCaseBase => "EmptyCaseBase",
            Error::EmptyNeighborhood => "EmptyNeighborhood",
            Error::NoUsableNeighbors => "NoUsableNeighbors",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonBinaryEntry(_) => "NonBinaryEntry",
            Error::UnsortedNeighborhood => "UnsortedNeighborhood",
        }
    }
}
