use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a structural invariant (lengths, finiteness, signs).
    #[error("validation error: {0}")]
    Validation(String),

    /// Spline knots do not form a valid covering sequence for the age grid.
    #[error("invalid knots: {0}")]
    InvalidKnots(String),

    /// The penalized likelihood has a singular Hessian; the fit is not identifiable.
    #[error("model not identifiable: {0}; use a positive penalty weight")]
    NonIdentifiable(String),

    /// Too few observed cells to fit the requested model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A relative metric was requested against a true log-rate of exactly zero.
    #[error("degenerate denominator: true log-rate is exactly 0 at age {age}")]
    DegenerateDenominator { age: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
