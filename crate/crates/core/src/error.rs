use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("squared distance must be nonnegative, got {0}")]
    NegativeDistance(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative order {0} is not supported")]
    UnsupportedOrder(usize),

    /// The requested quantity has no finite value (e.g. the second derivative
    /// of the Matérn 3/2 model at distance zero).
    #[error("{0} is unbounded")]
    Unbounded(&'static str),

    #[error("operation requires a stationary covariance model")]
    NotStationary,

    #[error("no finite optimal step for beta = {0} (requires beta > -1)")]
    NoFiniteStep(f64),

    #[error("stationary sample: gradient norm is zero")]
    ZeroGradient,

    #[error("stationary regularized gradient")]
    StationaryRegularizedGradient,

    #[error("one-dimensional minimizer failed: {0}")]
    MinimizerFailed(String),

    #[error("conditional variance {0} is negative beyond rounding")]
    NegativeVariance(f64),

    #[error(
        "covariance degeneracy while adding point {point} (closest previous point {closest} at distance {distance:e})"
    )]
    CovarianceDegeneracy {
        point: usize,
        closest: usize,
        distance: f64,
    },

    #[error("loss oracle failed at step {step}: {message}")]
    Oracle { step: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
