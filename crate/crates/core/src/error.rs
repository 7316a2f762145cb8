use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Permutation enumeration would exceed the fixed budget.
    #[error(
        "permutation budget exceeded: n = {n} > {max}; use the support-oracle construction instead"
    )]
    Budget { n: usize, max: usize },

    /// Input lies in a lower-dimensional affine subspace.
    #[error("degenerate input: affine dimension {affine_dim} < ambient dimension {dim}: {detail}")]
    Degenerate {
        dim: usize,
        affine_dim: usize,
        detail: String,
    },

    /// A CSV row has a different number of fields than the first data row.
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    /// A CSV cell could not be parsed as a number.
    #[error("row {row}, column {col}: cannot parse {value:?} as a number")]
    BadCell { row: usize, col: usize, value: String },

    #[error("unsupported output format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
