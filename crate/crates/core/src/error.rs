use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {id} has zero norm")]
    ZeroNormRow { id: usize },

    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("kernel is not symmetric")]
    NotSymmetric,

    #[error("matrix {what} is singular or not positive definite (pivot {pivot:.3e} at {at})")]
    Singular { what: String, pivot: f64, at: usize },

    #[error("element {0} is already selected")]
    AlreadySelected(usize),

    #[error("missing kernel block: {0}")]
    MissingBlock(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Innermost error, unwrapping round context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Round { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::Singular { .. })
    }
}
