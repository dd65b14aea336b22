use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("generator index {index} out of range (group has {count} generators)")]
    InvalidIndex { index: usize, count: usize },
    #[error("word is not reduced at position {0}")]
    NotReduced(usize),
    #[error("inconsistent group data: {0}")]
    GroupData(String),
    #[error("invalid representation: {0}")]
    Representation(String),
    #[error("representation is not unitary at cusp {0}")]
    NotUnitary(usize),
    #[error("degenerate geodesic trace: {0}")]
    Degenerate(String),
    #[error("modulus {0} not present in the double-coset table")]
    MissingModulus(f64),
    #[error("unknown builtin group `{0}`")]
    UnknownGroup(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{0}")]
    Limit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}
