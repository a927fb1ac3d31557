use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Solver outcomes such as infeasibility are not errors; they are reported
/// through [`crate::sdp::SolveStatus`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("matrix is not square ({rows}x{cols}) in {context}")]
    NotSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is not symmetric in {0}")]
    Asymmetric(&'static str),
    #[error("matrix is not positive definite in {0}")]
    NotPositiveDefinite(&'static str),
    #[error("closed loop is not Schur stable (spectral radius {0:.6})")]
    Unstable(f64),
    #[error("H2 paths require H = 0")]
    NonzeroFeedthrough,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("bisection bracket failure: upper bound {0} is not certified")]
    BracketFailure(f64),
    #[error("no consistent sample accepted after {0} attempts")]
    NoAcceptance(usize),
    #[error("solver returned status {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
