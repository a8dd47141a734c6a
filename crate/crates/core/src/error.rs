use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A user function returned a non-finite value.
    #[error("non-finite value {value} when evaluating at {at}")]
    Evaluation { at: f64, value: f64 },

    #[error("evaluation point {0} coincides with an atom")]
    SingularPoint(f64),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },

    #[error("observation {x} has vanishing likelihood on the grid (denominator {denominator:e})")]
    ObservationIncompatible { x: f64, denominator: f64 },

    #[error("{what} exceeds the exact-arithmetic bound {limit}")]
    Overflow { what: &'static str, limit: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
