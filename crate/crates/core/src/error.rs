use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhmmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("map is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("map increases trace (excess {0:.3e})")]
    TraceIncreasing(f64),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("degenerate trajectory: filter has zero trace")]
    DegenerateTrajectory,
    #[error("episode finished: step {step} with horizon {horizon}")]
    EpisodeFinished { step: usize, horizon: usize },
    #[error("unknown action {0}")]
    UnknownAction(usize),
    #[error("outcome {0} out of range")]
    OutcomeOutOfRange(usize),
    #[error("enumeration would visit more than {limit} paths")]
    EnumerationTooLarge { limit: usize },
    #[error("instrument is not undercomplete (recovery residual {residual:.3e})")]
    NotUndercomplete { residual: f64 },
    #[error("no recovery map for action {0}")]
    MissingRecoveryMap(usize),
    #[error("empty action set")]
    EmptyActionSet,
    #[error("observation has zero probability under the model")]
    ImpossibleObservation,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("model family is invalid: {0}")]
    FamilyInvalid(String),
    #[error("model is not identifiable: {0}")]
    Identifiability(String),
    #[error("identity check failed: {0}")]
    IdentityViolation(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, QhmmError>;
