use thiserror::Error;

/// Errors raised by engine operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("non-finite result while evaluating {context}")]
    NonFiniteResult { context: String },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("stimulus space mismatch: layer {left} vs layer {right}")]
    SpaceMismatch { left: usize, right: usize },

    #[error("binary-threshold unit {unit} in layer {layer} sits exactly at its threshold")]
    AtThreshold { layer: usize, unit: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("gradient row for core value {0} is zero")]
    ZeroGradient(usize),

    #[error("snapshot has no value for constrained cell `{0}`")]
    MissingField(String),

    #[error("unknown emotion label `{0}`")]
    UnknownLabel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid agent: {0}")]
    InvalidAgent(String),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    /// True for the structural errors a validated scenario can never raise.
    pub fn is_dimension_mismatch(&self) -> bool {
        matches!(self, Error::DimensionMismatch { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
