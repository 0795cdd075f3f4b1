use thiserror::Error;

/// Errors raised by the numerical kernels and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The measure has fewer points of increase than the rule requires, or
    /// the moment sequence is numerically inconsistent.
    #[error("degenerate measure: recurrence breaks down at index {index}")]
    DegenerateMeasure { index: usize },

    #[error(
        "tridiagonal eigensolver did not converge for eigenvalue {index} after {iterations} sweeps"
    )]
    NoConvergence { index: usize, iterations: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("moment {index} diverged (|value| = {value:e})")]
    Divergence { index: usize, value: f64 },

    #[error("likelihood collapse at t = {time}: normalizer underflowed")]
    LikelihoodCollapse { time: f64 },

    #[error(
        "finite-difference domain too small: {leaked:.3e} of the mass left through the boundary"
    )]
    DomainTooSmall { leaked: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("correction {obs_index} (step {step}): {source}")]
    Correction {
        step: usize,
        obs_index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// Strips step/correction context and returns the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } | Error::Correction { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure comes from a quadrature breakdown, the case a
    /// caller may recover from by lowering the number of Gauss points.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateMeasure { .. }
                | Error::NoConvergence { .. }
                | Error::NumericalFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
