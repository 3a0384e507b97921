//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample must be nonempty")]
    EmptySample,

    #[error("non-finite value in input: {0}")]
    NonFinite(f64),

    #[error("{name} must lie in (0, 1), got {value}")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("requested order statistic {m} is outside 1..={n}")]
    LevelOutOfRange { m: usize, n: usize },

    #[error("group {index} has {got} observations, need at least {required}")]
    GroupTooSmall {
        index: usize,
        got: usize,
        required: usize,
    },

    #[error("need at least {required} groups, got {got}")]
    TooFewGroups { required: usize, got: usize },

    #[error("group index {index} out of range for {k} groups")]
    BadGroupIndex { index: usize, k: usize },

    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u8),

    #[error("logistic MLE did not converge (separated or degenerate data)")]
    MleDiverged,

    #[error("degenerate point cloud: zero variance in coordinate {coordinate}")]
    DegenerateBandwidth { coordinate: usize },

    #[error("method is incompatible with the design: {0}")]
    MethodDesignMismatch(&'static str),
}
