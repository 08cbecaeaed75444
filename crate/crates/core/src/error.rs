use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm {0:e} is too small to normalize (jump applied to a dark state?)")]
    ZeroNorm(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("negative time {0} passed to a rate function")]
    NegativeTime(f64),

    #[error("branch probability {probability} exceeds the limit {limit}; reduce the time step")]
    StepTooLarge { probability: f64, limit: f64 },

    #[error("reverse-jump source entry {0} is empty")]
    SourceEmpty(usize),

    #[error("model {0} has no closed-form solution")]
    UnsupportedModel(String),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
