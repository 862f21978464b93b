use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("grid_n = {n} is below the minimum of {min}")]
    GridTooSmall { n: usize, min: usize },
    #[error("non-finite field value at step {step} (t = {t})")]
    NonFinite { step: u64, t: f64 },
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("tip path too short: {have} rotations, need {need}")]
    PathTooShort { have: usize, need: usize },
    #[error("grids differ: {0} vs {1} cells")]
    GridMismatch(usize, usize),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
