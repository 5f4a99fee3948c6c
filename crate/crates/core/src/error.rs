use thiserror::Error;

use crate::scheduling::CalibrationResiduals;

/// Errors produced anywhere in the scheduling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(
        "infeasible harvest requirement: q_req = {q_req:.6e} W, achievable range is [0, {max:.6e}] W"
    )]
    Infeasible { q_req: f64, max: f64 },

    #[error("calibration did not converge after {iterations} iterations ({residuals})")]
    NotConverged {
        iterations: usize,
        residuals: Box<CalibrationResiduals>,
    },

    #[error("enumeration budget exceeded: {assignments} assignments > {budget}")]
    BudgetExceeded { assignments: u128, budget: u128 },

    #[error("calibration record does not match settings (hash {found}, expected {expected})")]
    RecordMismatch { found: String, expected: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
