//! Comparison solvers: the exact Kalman filter for linear-Gaussian models,
//! a continuous-discrete extended Kalman filter, and a finite-difference
//! solver for the normalized Zakai equation on a bounded interval.

mod ekf;
mod fd;
mod kalman;

pub use ekf::ekf;
pub use fd::{fd_zakai, FdOptions, FdRun, FdSolver, GridDensity};
pub use kalman::{kalman_exact, kalman_on_grid};

use crate::error::{Error, Result};
use crate::filter::ConditionalStats;

/// Gaussian approximation `N(mean, variance)` of the conditional law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "invalid Gaussian belief N({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn stats(&self, time: f64, orders: usize) -> ConditionalStats {
        ConditionalStats::from_gaussian(time, self.mean, self.variance, orders)
    }
}
