use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid pair distribution: p0 = {0}")]
    InvalidDistribution(f64),

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("dictionary mismatch: data expects {expected:#018x}, dictionary is {found:#018x}")]
    DictionaryMismatch { expected: u64, found: u64 },

    #[error("fast tier capacity of {capacity} tokens exceeded by a request for {requested}")]
    CapacityExceeded { capacity: usize, requested: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }
}
