use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("strategy is not admissible: {0}")]
    NotAdmissible(String),

    #[error("simulation produced a non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("path and grid are inconsistent: {0}")]
    PathMismatch(String),

    #[error("empty path after burn-in")]
    EmptyPath,

    #[error(
        "power iteration did not converge in {iterations} iterations \
         (last l1 change {last_diff:.3e}, spectral gap estimate {gap_estimate:.3e})"
    )]
    PowerIterationFailed {
        iterations: usize,
        last_diff: f64,
        gap_estimate: f64,
    },

    #[error("estimators disagree: oracle {oracle:.6} vs simulation {simulation:.6} (allowance {allowance:.2e})")]
    EstimatorDisagreement {
        oracle: f64,
        simulation: f64,
        allowance: f64,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("scenario validation failed:\n{0}")]
    ValidationFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
