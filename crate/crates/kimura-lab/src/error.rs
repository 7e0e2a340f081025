use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected (n={expected_n}, m={expected_m}), got (n={got_n}, m={got_m})")]
    DimensionMismatch {
        expected_n: usize,
        expected_m: usize,
        got_n: usize,
        got_m: usize,
    },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` out of range at byte {offset}: configured n={n}, m={m}")]
    VariableOutOfRange {
        offset: usize,
        name: String,
        n: usize,
        m: usize,
    },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("field error: {0}")]
    Field(String),
    #[error("norm error: {0}")]
    Norm(String),
    #[error("cutoff/partition error: {0}")]
    Cutoff(String),
    #[error("linear solver error: {0}")]
    LinearSolve(String),
    #[error("solver error: {0}")]
    Solve(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("assumption violation: {0}")]
    Assumption(String),
    #[error("verification error: {0}")]
    Verify(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
