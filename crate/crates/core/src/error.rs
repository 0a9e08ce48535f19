use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("model validation failed: {0}")]
    InvalidModel(String),

    #[error("frame has no sampled units")]
    NoSample,

    /// The operation needs at least two sampled units.
    #[error("degenerate frame: {0}")]
    Degenerate(String),

    #[error("census frame: every unit is sampled, no predictive distribution exists")]
    Census,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(String),

    #[error("divergence undefined: matrix `{0}` is not positive definite")]
    DivergenceUndefined(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("clipping constant unresolved: calibrate C from the excess budget first")]
    UnresolvedClip,

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    /// A simulation config field violates an invariant; `pointer` is a JSON
    /// pointer to the field.
    #[error("invalid config at {pointer}: {message}")]
    InvalidConfig { pointer: String, message: String },

    #[error("Monte Carlo oracle failed: {0}")]
    OracleFailure(String),
}
