use thiserror::Error;

/// Errors raised across the influence toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, outside tolerance {tol}")]
    RowSumViolation { row: usize, sum: f64, tol: f64 },

    #[error("vector is not on the simplex: {0}")]
    NotOnSimplex(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("all expertise entries are zero")]
    ZeroExpertise,

    #[error("perceived expertise undefined: self-weights and expertise have zero inner product")]
    DegeneratePerception,

    #[error("team of {0} members is too small (need at least 3)")]
    TeamTooSmall(usize),

    #[error("history is empty")]
    EmptyHistory,

    #[error("rater {0} assigns no weight to anyone else")]
    IsolatedRater(usize),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("missing feature: {0}")]
    MissingFeature(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("solver hit the iteration cap ({0}) before converging")]
    SolverNoConvergence(usize),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),

    #[error("series of length {len} is too short for lag {lag}")]
    SeriesTooShort { len: usize, lag: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
