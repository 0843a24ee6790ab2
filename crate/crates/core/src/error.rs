use alloc::string::String;

/// Errors raised by the sensitivity-analysis engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityDomain(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("covariance matrix is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("covariance matrix is near-singular (eigenvalue ratio {ratio:e})")]
    NearSingular { ratio: f64 },

    #[error("singular conditioning block")]
    SingularConditioning,

    #[error("empty sample")]
    EmptySample,

    #[error("degenerate output: average contrast {0:e} is below the normalization threshold")]
    DegenerateOutput(f64),

    #[error("no exact conditional law for this model and coalition: {0}")]
    Unsupported(String),

    #[error("dimension {d} exceeds the exact-enumeration cap {cap}")]
    DimensionCap { d: usize, cap: usize },

    #[error("numerical routine did not converge: {0}")]
    NoConvergence(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
