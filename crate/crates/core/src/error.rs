use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has no rows")]
    EmptyMatrix,

    #[error("matrix is not orthogonal (max |QᵀQ - I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("Jacobi eigensolver did not converge (off-diagonal residual {residual:e})")]
    EigenNotConverged { residual: f64 },

    #[error("matrix is not positive definite (leading minor of order {minor} is not positive)")]
    NotPositiveDefinite { minor: usize },

    #[error("need at least {needed} observations, got {n}")]
    TooFewObservations { n: usize, needed: usize },

    #[error("invalid eigenvalue bounds [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },

    #[error("schedule position {0} is outside [0, 1]")]
    SchedulePosition(f64),

    #[error("sample covariance is singular (smallest eigenvalue {0:e}); standardize the data or reduce its dimension")]
    SingularCovariance(f64),

    #[error("data has {distinct} distinct points but {groups} clusters were requested")]
    TooFewDistinctPoints { distinct: usize, groups: usize },

    #[error("unknown covariance structure {0:?}")]
    UnknownStructure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CSV error at row {row}, column {column}: {message}")]
    Csv { row: usize, column: usize, message: String },

    #[error("column {0:?} is constant and cannot be standardized")]
    ConstantColumn(String),

    #[error("partitions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
