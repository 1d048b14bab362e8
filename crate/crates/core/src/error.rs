use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{method} did not converge after {iterations} iterations (last estimate {last})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("could not bracket the Lagrange multiplier: {0}")]
    BracketNotFound(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
