use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested bound or lemma does not apply to these parameters.
    #[error("outside the domain of applicability: {0}")]
    Inapplicable(String),

    #[error("preconditions unmet: {0}")]
    PreconditionUnmet(String),

    /// Exact evaluation would exceed the state-space guard.
    #[error("exact evaluation guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}
