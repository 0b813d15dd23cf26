//! Library-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two tables (or an MDP and a table) disagree on state/action counts.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An iterative solver hit its iteration cap before certifying the tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    /// A closed-form bound was requested outside the regime where it is defined.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// A requested perturbation cannot produce a valid MDP.
    #[error("infeasible perturbation: {0}")]
    InfeasiblePerturbation(String),

    /// A config file could not be parsed or fails validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than runtime failure.
    /// The CLI maps these to exit code 2, everything else to 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::ShapeMismatch(_)
                | Error::OutOfRegime(_)
                | Error::InfeasiblePerturbation(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
