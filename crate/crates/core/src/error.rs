use crate::bigfloat::ArithError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Fourier data is not Hermitian-symmetric at k = {0}")]
    Asymmetric(i64),
    #[error("{0} out of range")]
    Range(String),
    #[error("sampled data: {0}")]
    Samples(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cannot parse {0}")]
    Parse(String),
    #[error("{0} lies below the precision floor")]
    BelowFloor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
