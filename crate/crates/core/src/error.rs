use thiserror::Error;

use crate::subsets::Subset;

/// Broad classes of failure, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    NotApplicable,
    Resource,
    Invariant,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("recombination weight on the empty set must be zero")]
    NonzeroEmptySet,
    #[error("negative recombination weight {weight} on {subset}")]
    NegativeWeight { subset: Subset, weight: String },
    #[error("recombination weights sum to {sum}, expected 1")]
    NotNormalized { sum: String },
    #[error("could not parse rational {0:?} (expected \"p/q\" or an integer)")]
    ParseRational(String),
    #[error("{0}")]
    NotApplicable(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotApplicable(_) => ErrorKind::NotApplicable,
            Error::ResourceLimit(_) => ErrorKind::Resource,
            Error::Invariant(_) => ErrorKind::Invariant,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
