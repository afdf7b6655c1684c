use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must have dimension >= 1")]
    EmptyMatrix,
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetry {asymmetry:e} exceeds construction tolerance")]
    Asymmetric { asymmetry: f64 },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Schur complement pivot block is singular")]
    SingularBlock,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("internal defect: {0}")]
    Internal(String),

    #[error("assignment is missing variable block `{0}`")]
    MissingBlock(String),
    #[error("unknown variable block `{0}`")]
    UnknownBlock(String),
    #[error("objective degree {0} exceeds the supported maximum of 4")]
    DegreeTooHigh(usize),
    #[error("grid of {points} points exceeds the budget of {budget}")]
    GridBudgetExceeded { points: f64, budget: f64 },
    #[error("variable block `{0}` has no bounds box")]
    MissingBounds(String),
    #[error("no feasible grid point")]
    NoFeasibleGridPoint,

    #[error("Lyapunov matrix P is singular or not invertible")]
    SingularP,
    #[error("point lies outside the recovery domain: {0}")]
    DomainViolation(String),
    #[error("no strictly feasible target samples could be generated")]
    SamplingFailed,

    #[error("SDP solver failed: {0}")]
    SolverFailure(String),
    #[error("no stabilizing certificate found at the tested epsilon values (last margin {last_margin:e})")]
    NotStabilizable { last_margin: f64 },
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("no stabilizable pair found after {0} draws")]
    GenerationBudgetExceeded(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("no lossless convexification available for kind {0}")]
    NoLosslessMap(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
