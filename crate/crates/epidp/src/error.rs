use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("region {region:?} not found; available: {}", available.join(", "))]
    RegionNotFound { region: String, available: Vec<String> },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] epidp_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(line: u64, message: impl Into<String>) -> Self {
        Error::Row {
            line,
            message: message.into(),
        }
    }

    /// True when a privacy budget refused a charge.
    pub fn is_budget_exceeded(&self) -> bool {
        matches!(self, Error::Core(epidp_core::Error::BudgetExceeded { .. }))
    }
}

pub(crate) fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::row(line, format!("bad date {s:?}: {e}")))
}
