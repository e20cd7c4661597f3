use thiserror::Error;

/// Errors shared by all simulator modules.
#[derive(Debug, Error)]
pub enum DmError {
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("covariance is numerically singular even after diagonal loading")]
    IllConditioned,

    #[error("source count {q} must be positive and less than the array size {n}")]
    InvalidSourceCount { q: usize, n: usize },

    #[error("a single-element array has no null space")]
    NoNullSpace,

    #[error("not enough usable roots: needed {needed}, found {found} ({dropped} out-of-range roots dropped)")]
    NotEnoughRoots {
        needed: usize,
        found: usize,
        dropped: usize,
    },

    #[error("posterior mass piled up on the prior boundary; widen the prior support")]
    PriorSupportTooNarrow,

    #[error("distinct subcarrier assignment infeasible: {antennas} antennas but only {subcarriers} subcarriers")]
    InfeasibleAssignment {
        antennas: usize,
        subcarriers: usize,
    },

    #[error("target {0} lies outside the map")]
    OutOfBounds(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for DmError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        DmError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DmError>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> DmError {
    DmError::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
