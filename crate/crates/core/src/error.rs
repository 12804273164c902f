use alloc::string::String;
use alloc::vec::Vec;

use crate::partition::Violation;

/// Errors raised by the backtesting core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distortion function: {0}")]
    InvalidDistortion(String),

    #[error("stratum [{lo}, {hi}] carries no probability mass")]
    EmptyStratum { lo: f64, hi: f64 },

    #[error("partition is invalid for the selected mode: {0:?}")]
    PartitionInvalid(Vec<Violation>),

    #[error("risk measure integral diverges: {0}")]
    DivergedIntegral(String),

    #[error("variance undefined for nu = {0} (requires nu > 2)")]
    UndefinedVariance(f64),

    #[error("mean undefined for nu = {0} (requires nu > 1)")]
    UndefinedMean(f64),

    #[error("acceptance-rejection sampler exceeded {0} proposals")]
    SamplerStuck(u64),

    #[error("cell {cell} has expected count {expected:e}; test statistic is ill-conditioned")]
    IllConditionedCells { cell: usize, expected: f64 },

    #[error("invalid test configuration: {0}")]
    InvalidConfiguration(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("probability {0} lies outside the forecast grid")]
    OutsideGrid(f64),

    #[error("inner simulation needs at least {min} samples, got {got}")]
    InsufficientInnerSamples { min: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
