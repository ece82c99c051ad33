use thiserror::Error;

/// Errors raised by region construction, transforms and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid cost kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid price pattern: {0}")]
    InvalidPrice(String),

    /// Every candidate in the restriction set carries an unbounded price.
    #[error("price pattern is +inf on every point of the restriction set")]
    ImproperPrice,

    /// The c-superdifferential came back empty, so the function is not
    /// c-concave relative to the requested point set.
    #[error("function is not c-concave at point {point} (empty superdifferential)")]
    NotCConcave { point: usize },

    #[error("search budget exceeded: {candidates} candidates > budget {budget}")]
    BudgetExceeded { candidates: f64, budget: u64 },

    #[error("solver not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
