use thiserror::Error;

/// Errors surfaced by dataset ingestion, weighting and resampling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{0}` not found in input")]
    MissingColumn(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate arm: {0}")]
    DegenerateArm(String),

    #[error("estimand undefined: {0}")]
    EstimandUndefined(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
