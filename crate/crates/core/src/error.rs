use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("not Hermitian")]
    NotHermitian,

    #[error("not conditionally positive")]
    NotConditionallyPositive,

    #[error("representation ill-defined")]
    RepresentationIllDefined,

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("model validation failed: {}", .0.join("; "))]
    ModelValidation(Vec<String>),

    /// A solver produced a non-finite value; reports the first bad step.
    #[error("numerical breakdown at step {step}: {what}")]
    NumericalBreakdown { step: usize, what: String },

    #[error("singular matrix")]
    Singular,

    #[error("{0}")]
    Invalid(String),
}
