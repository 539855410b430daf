use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing value at row {row}, column {col}")]
    MissingValue { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid cluster assignment: {0}")]
    Assignment(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Symmetry(f64),

    #[error("invalid mass: {0}")]
    Mass(String),

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("rank-deficient projector source: {0}")]
    Projector(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
