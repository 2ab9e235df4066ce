use alloc::string::String;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = SasaError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SasaError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(Violation),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weight scheme `{scheme}` requires {input}")]
    MissingInput { scheme: &'static str, input: &'static str },

    #[error("self-loop on location {0}")]
    SelfLoop(usize),

    #[error("location index {index} out of range for {n} locations")]
    UnknownLocation { index: usize, n: usize },

    #[error("global design rank-deficient")]
    GlobalRankDeficient,

    #[error("partition design rank-deficient")]
    PartitionRankDeficient,

    #[error("design for location {location} is singular; use ridge_fusion initialization")]
    LocationRankDeficient { location: usize },

    #[error("linear system is singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("divergence: non-finite iterate at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("group gap undefined for a single group")]
    GapUndefined,

    #[error("nonpositive residual degrees of freedom ({dof})")]
    NonPositiveDof { dof: i64 },

    #[error("every tuning cell failed")]
    AllCellsFailed,

    #[error("location {location} has {have} replicates, fewer than {folds} folds; use fewer folds")]
    TooFewReplicates { location: usize, have: usize, folds: usize },
}

impl SasaError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SasaError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
