use thiserror::Error;

/// Errors produced by dataset ingestion, preprocessing, and the test engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },

    #[error("arm `{0}` not present in the treatment column")]
    ArmNotFound(String),

    #[error("arm `{label}` has {count} patients; at least {min} required")]
    TooFewPerArm {
        label: String,
        count: usize,
        min: usize,
    },

    #[error("treatment vector has fewer than two distinct values")]
    SingleArm,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(
        "cumulative path endpoint {endpoint:e} exceeds the centered-input budget {budget:e}; \
         the ring construction requires a bridge (sum of outcomes ~ 0)"
    )]
    UncenteredPath { endpoint: f64, budget: f64 },

    #[error("dose label `{0}` not present in the encoding")]
    UnknownDose(String),

    #[error("dose encoding is not injective: `{0}` and `{1}` map to the same value")]
    DoseNotInjective(String, String),

    #[error("unknown statistic `{0}`; valid names: {1}")]
    UnknownStatistic(String, String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
