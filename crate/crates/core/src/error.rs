use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A vector with (numerically) zero norm cannot be projected onto the sphere.
    #[error("vector norm {norm:e} is too small to project onto the sphere")]
    ZeroVector {
        /// Observed norm.
        norm: f64,
    },
    /// Requested more distinct batch indices than the ensemble holds.
    #[error("batch size {batch_size} exceeds ensemble size {ensemble_size}")]
    BatchTooLarge {
        /// Requested batch size.
        batch_size: usize,
        /// Number of ensemble components.
        ensemble_size: usize,
    },
    /// A loss or gradient value became NaN or infinite.
    #[error("non-finite value encountered at iteration {iter}")]
    NonFinite {
        /// Iteration at which the value was observed.
        iter: u64,
    },
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Expected dimension.
        expected: usize,
        /// Observed dimension.
        got: usize,
    },
    /// Component index outside the ensemble.
    #[error("component index {index} out of range for ensemble of size {len}")]
    IndexOutOfRange {
        /// Requested index.
        index: usize,
        /// Ensemble size.
        len: usize,
    },
    /// Not enough samples for the requested estimate.
    #[error("need more than {needed} samples, got {got}")]
    TooFewSamples {
        /// Minimum (exclusive) sample count.
        needed: usize,
        /// Available samples.
        got: usize,
    },
    /// The k-NN graph has zero total length (all samples coincide).
    #[error("k-NN graph has zero total edge length")]
    NonPositiveEdgeLength,
    /// Empty input series.
    #[error("empty input")]
    EmptyInput,
    /// A series is too short for the requested finite difference.
    #[error("series of length {len} too short for step {dt}")]
    SeriesTooShort {
        /// Series length.
        len: usize,
        /// Half-width of the centred difference.
        dt: usize,
    },
    /// Power-law fit given a non-positive coordinate.
    #[error("power-law fit requires strictly positive inputs")]
    NonPositiveInput,
    /// Power-law fit given identical abscissae.
    #[error("power-law fit requires at least two distinct x values")]
    DegenerateX,
    /// Closed-form expression evaluated where its denominator vanishes.
    #[error("closed form is degenerate at this point")]
    DegeneratePoint,
    /// Argument outside the domain of a closed-form identity.
    #[error("argument outside the admissible domain: {0}")]
    DomainViolation(&'static str),
    /// Invalid parameter value.
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Result alias for the numerical core.
pub type Result<T, E = Error> = core::result::Result<T, E>;
