use thiserror::Error;

/// Errors raised by the spectral utilities, problem evaluators, solvers and
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular (smallest |eigenvalue| {min_abs_eigenvalue:e})")]
    SingularMatrix { min_abs_eigenvalue: f64 },

    #[error("evaluation of {what} produced a non-finite value")]
    EvaluationError { what: &'static str },

    #[error("problem `{problem}` has no analytic {what}")]
    MissingDerivative { problem: String, what: &'static str },

    #[error("delta ladder exhausted without reaching the eigenvalue floor {floor:e}")]
    RegularizationFailed { floor: f64 },

    #[error("line search stalled: step size fell below {gamma_min:e}")]
    LineSearchStalled { gamma_min: f64 },

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("point is not critical: |grad f| = {grad_norm:e} exceeds {tol:e}")]
    NotCritical { grad_norm: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
