use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("component {0} has zero weight; rank-bounded monomial search would not terminate")]
    ZeroWeight(String),
    #[error("invalid rank target: {0}")]
    RankTarget(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
