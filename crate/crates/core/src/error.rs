//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the flow, symbol and state machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not match the phase-space dimension.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Invalid input data (non-finite entries, malformed matrices, bad parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A time outside the integrated range of a flow was requested.
    #[error("time {t} outside integrated range [0, {t_max}]")]
    OutOfRange { t: f64, t_max: f64 },

    /// The adaptive integrator failed to reach the requested tolerance.
    #[error("integration failure near t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    /// A matrix that must be invertible was (numerically) singular.
    #[error("singular matrix in {0}")]
    SingularMatrix(String),

    /// Polynomial degree would exceed the configured cap.
    #[error("polynomial degree {degree} exceeds cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    /// Two symbols with incompatible exponential parts were combined linearly.
    #[error("incompatible exponential parts: {0}")]
    ExponentMismatch(String),

    /// A Gaussian integral does not converge (real part of the quadratic form
    /// is not positive definite).
    #[error("divergent Gaussian integral: {0}")]
    DivergentIntegral(String),

    /// The closed-form star composition hit a singular intermediate matrix.
    #[error("singular star-product composition: {0}")]
    SingularStarComposition(String),

    /// Neither star-product evaluation strategy applies to the operand pair.
    #[error("no applicable star-product strategy: {0}")]
    NoApplicableStrategy(String),

    /// An eigenstate failed its defining residual checks after construction.
    #[error("state construction failure: {0}")]
    ConstructionFailure(String),

    /// A model was asked for something outside its admissible parameter range.
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
