use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("privacy budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: f64, remaining: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("no epidemiological data for {country} in week ending {week}")]
    MissingEpiWeek { country: String, week: NaiveDate },

    #[error("training failed: {0}")]
    Training(String),

    #[error("Newton iterations did not converge after {iterations} steps (gradient norm {gradient_norm:e}, last iterate {beta:?})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        beta: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
