use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid size: {0}")]
    Size(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("iterates diverged: {0}")]
    Diverged(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
