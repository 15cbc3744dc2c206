use thiserror::Error;

pub type Result<T> = std::result::Result<T, RcaError>;

#[derive(Debug, Error)]
pub enum RcaError {
    #[error("invalid tensor order {order}: {reason}")]
    InvalidOrder { order: usize, reason: &'static str },

    #[error("shape mismatch on mode {mode}: expected {expected}, found {found}")]
    Shape {
        mode: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample alignment error: input {index} has {found} rows, expected {expected}")]
    Alignment {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("cumulant order {order} exceeds the supported cap of {cap}")]
    OrderCap { order: usize, cap: usize },

    #[error("degenerate component: smallest singular value {sigma:.3e} below threshold {threshold:.3e}")]
    DegenerateComponent { sigma: f64, threshold: f64 },

    #[error("degenerate linear map: smallest singular value {sigma:.3e} below threshold {threshold:.3e}")]
    DegenerateMap { sigma: f64, threshold: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("cumulant order {order} is below the distinguishability level {level}")]
    OrderTooLow { order: usize, level: usize },

    #[error("rank deficient matrix: smallest singular value {sigma:.3e} below threshold {threshold:.3e}")]
    Rank { sigma: f64, threshold: f64 },

    #[error("alternating least squares did not converge; best relative residual {best_residual:.3e}")]
    Convergence { best_residual: f64 },

    #[error("gradient became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RcaError {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            RcaError::Config(_) | RcaError::Json(_) | RcaError::Io(_) => 2,
            _ => 3,
        }
    }
}
