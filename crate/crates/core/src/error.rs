use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The integrand produced a non-finite value.
    #[error("integrand returned {value} at abscissa {abscissa:?}")]
    Evaluation { abscissa: Vec<f64>, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
