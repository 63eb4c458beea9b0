use thiserror::Error;

/// Errors produced by problem construction, drivers, and the verification layer.
#[derive(Debug, Error)]
pub enum CdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coordinate {i} has zero curvature; the chosen step rule divides by it")]
    ZeroCurvature { i: usize },

    #[error("objective diverged at iteration {k} (value {objective:e})")]
    Diverged { k: u64, objective: f64 },

    #[error("essentially-cyclic condition violated at iteration {k} (window T={t})")]
    EssentiallyCyclicViolation { k: u64, t: usize },

    #[error("inner solve did not converge: {0}")]
    InnerSolve(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("state renormalization failed: {0}")]
    Renormalization(String),

    #[error("worker thread panicked")]
    WorkerPanic,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CdError>;
