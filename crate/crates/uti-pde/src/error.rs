use thiserror::Error;

/// Errors raised by the solvers, evaluators and the scenario harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("derivative order {0} not implemented (supported orders: 0, 1)")]
    OrderNotImplemented(u32),

    #[error("quadrature did not converge: error estimate {estimate:.3e} above tolerance {tol:.3e}")]
    NoConvergence { estimate: f64, tol: f64 },

    #[error("truncation tail estimate {estimate:.3e} above tolerance {tol:.3e}; enlarge the truncation radius")]
    Truncation { estimate: f64, tol: f64 },

    #[error("non-finite integrand at node k = {re:.6e}{im:+.6e}i")]
    NonFinite { re: f64, im: f64 },

    #[error("exponent overflow; rescale (exponent {0:.1} exceeds 700)")]
    Overflow(f64),

    #[error("formula evaluation inconsistent: imaginary residue {0:.3e}")]
    Inconsistent(f64),

    #[error("node collides with a zero of sin(k l) at k = {0:.6e}")]
    NodeCollision(f64),

    #[error("contraction certificate refused: kappa = {kappa:.6} exceeds threshold {threshold}; {hint}")]
    NotAdmissible { kappa: f64, threshold: f64, hint: &'static str },

    #[error("no convergence after {max_iter} iterations; last residual {last:.3e}")]
    MaxIterations { max_iter: usize, last: f64, log: Vec<f64> },

    #[error("collocation system ill-conditioned (condition estimate {0:.3e}); use a smaller M or different nodes")]
    IllConditioned(f64),

    #[error("window overlap mismatch {mismatch:.3e} exceeds {limit:.3e}")]
    OverlapMismatch { mismatch: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
