use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown objective `{0}` (expected one of ackley, griewank, alpine1, levy, logrosen)")]
    UnknownObjective(String),

    #[error("invalid dimension {dim} for `{name}`: {reason}")]
    InvalidDimension {
        name: String,
        dim: usize,
        reason: &'static str,
    },

    #[error("non-finite input: component {index} is {value}")]
    NonFiniteInput { index: usize, value: f64 },

    #[error("non-finite objective value {value} at sample {sample}")]
    NonFiniteSample { sample: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("homotopy parameter t = {0} is outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("budget {budget} is smaller than one iteration's cost {cost}")]
    BudgetTooSmall { budget: u64, cost: u64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("grid too small: minimizer sits at the grid boundary {0}")]
    GridBoundary(f64),

    #[error("infeasible problem shape: {0}")]
    InfeasibleShape(String),

    #[error("config parse error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
