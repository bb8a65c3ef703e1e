use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("improper integral did not converge")]
    DivergentIntegral,

    #[error("malformed point sequence: {0}")]
    MalformedSequence(String),

    #[error("points are not in concave position")]
    NotConcavePosition,

    #[error("point ({alpha}, {beta}) does not lie strictly above the curve")]
    NotExterior { alpha: f64, beta: f64 },

    #[error("val gap {margin:e} is below the required margin {required:e}")]
    MarginTooSmall { margin: f64, required: f64 },

    #[error("discretization needs more than {limit} points")]
    BudgetInfeasible { limit: usize },

    #[error("value exceeds the floating-point exponent range")]
    Overflow,

    #[error("mean of squares under the null is zero")]
    DegenerateDenominator,

    #[error("empty sample")]
    EmptySample,

    #[error("malformed test outcomes: {0}")]
    MalformedOutcomes(String),

    #[error("lookup table over {r} tests exceeds the supported maximum of 20")]
    TooManyTests { r: usize },
}

impl Error {
    /// Errors raised by numerical guards rather than by bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::MarginTooSmall { .. }
                | Error::DegenerateDenominator
                | Error::DivergentIntegral
                | Error::ConvergenceFailure
                | Error::BudgetInfeasible { .. }
                | Error::Overflow
        )
    }
}
