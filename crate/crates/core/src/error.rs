use thiserror::Error;

/// Errors raised by the engine. Undefined word evaluations are not errors;
/// they surface as `None`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {coord} is not in the {space}")]
    PointOutOfSpace { coord: f64, space: &'static str },

    #[error("generator {id}: {reason}")]
    InvalidGenerator { id: u32, reason: String },

    #[error("generating set: {0}")]
    InvalidGeneratingSet(String),

    #[error("word is not in the domain of the pseudo-orbit: {0}")]
    NotInDomain(String),

    #[error("insufficient data for eps = {eps}: {levels} resolved levels, need at least {needed}")]
    InsufficientData { eps: f64, levels: usize, needed: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("Morse-Smale hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("strong separation failed for pair ({left}, {right}): {reason}")]
    SeparationFailure {
        left: String,
        right: String,
        reason: String,
    },

    #[error("orbit record mismatch: {0}")]
    RecordMismatch(String),

    #[error("unknown gallery system `{0}`")]
    UnknownSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
