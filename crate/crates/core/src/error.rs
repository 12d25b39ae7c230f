use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("{what} = {value} is outside the supported range {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },

    #[error("bias must be positive, got {0}")]
    NonPositiveBias(String),

    #[error("weight polynomial has no nonzero coefficient")]
    ZeroWeights,

    #[error("eigenvalues are not sorted in descending order")]
    Unsorted,

    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("engine `{engine}` cannot handle {what}")]
    IncompatibleEngine { engine: String, what: String },

    #[error("could not parse `{input}` as {what}")]
    Parse { input: String, what: &'static str },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn out_of_range(
        what: &'static str,
        value: impl ToString,
        range: impl ToString,
    ) -> Self {
        Error::OutOfRange {
            what,
            value: value.to_string(),
            range: range.to_string(),
        }
    }
}
