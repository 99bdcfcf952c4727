use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid subsystem shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("subsystem position {position} out of range for {count} subsystems")]
    InvalidSubsystem { position: usize, count: usize },

    #[error("subsystem position {0} listed more than once")]
    RepeatedSubsystem(usize),

    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("duplicate wire label `{0}`")]
    DuplicateLabel(String),

    #[error("wire `{label}` has dimension {left} on one side and {right} on the other")]
    LabelMismatch {
        label: String,
        left: usize,
        right: usize,
    },

    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("missing Choi block for outcome {outcome}, labels {labels:?}")]
    MissingBlock { outcome: usize, labels: Vec<usize> },

    #[error("qubit-only operation called with wire dimensions {0:?}")]
    NonQubitWires(Vec<usize>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed functional: {0}")]
    MalformedFunctional(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("solution status is {0}, expected optimal")]
    NotOptimal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
