use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("too few observations: need more than {needed}, have {have}")]
    TooFewObservations { needed: usize, have: usize },

    #[error("row {row}, column '{column}': {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("unsupported model file version {found} (this build reads {supported}.x)")]
    Version { found: String, supported: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the input data or files rather than by the
    /// numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Cell { .. }
                | Error::MissingColumn(_)
                | Error::Version { .. }
                | Error::Corrupt(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::DimensionMismatch { .. }
                | Error::TooFewObservations { .. }
        )
    }
}
