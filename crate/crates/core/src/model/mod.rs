//! Scalar diffusions `dX = b(X) dt + sigma(X) dW` and their observation
//! models.

mod catalog;

pub use catalog::{
    builtin_catalog, lookup, CatalogParams, InitialLaw, LinearGaussian, ModelCatalogEntry,
};

use crate::error::{Error, Result};
use crate::quadrature::{Derivative, RecurrenceBasis};
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Vector-valued map `x -> out` with `out.len()` equal to the observation dimension.
pub type VectorFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Drift `b`, diffusion `sigma` and the drift derivative `b'` (used by the EKF).
#[derive(Clone)]
pub struct ScalarDiffusion {
    drift: ScalarFn,
    diffusion: ScalarFn,
    drift_jacobian: ScalarFn,
}

impl fmt::Debug for ScalarDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarDiffusion").finish_non_exhaustive()
    }
}

impl ScalarDiffusion {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        drift_jacobian: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            drift_jacobian: Arc::new(drift_jacobian),
        }
    }

    /// `dX = -rate X dt + sigma dW`.
    pub fn ornstein_uhlenbeck(rate: f64, sigma: f64) -> Self {
        Self::new(move |x| -rate * x, move |_| sigma, move |_| -rate)
    }

    /// `dX = sigma dW`.
    pub fn brownian(sigma: f64) -> Self {
        Self::new(|_| 0.0, move |_| sigma, |_| 0.0)
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    pub fn drift_jacobian(&self, x: f64) -> f64 {
        (self.drift_jacobian)(x)
    }

    /// `a(x) = sigma(x)^2`.
    pub fn diffusion_squared(&self, x: f64) -> f64 {
        let s = self.diffusion(x);
        s * s
    }

    /// `L phi(x) = b(x) phi'(x) + a(x) phi''(x) / 2` from precomputed derivatives.
    #[inline]
    pub fn generator(&self, x: f64, first: f64, second: f64) -> f64 {
        self.drift(x) * first + 0.5 * self.diffusion_squared(x) * second
    }

    /// Generator applied to basis polynomial `p_k` at `x`.
    pub fn apply_generator(&self, basis: &RecurrenceBasis, k: usize, x: f64) -> Result<f64> {
        let d1 = basis.eval(k, x, Derivative::First)?;
        let d2 = basis.eval(k, x, Derivative::Second)?;
        Ok(self.generator(x, d1, d2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    /// `y_k = h(X_{t_k}) + v_k`, `v_k ~ N(0, R)`.
    Discrete,
    /// `dY = h(X) dt + rho dV`, observed through averaged increments
    /// `y_k = (Y_{t_{k+1}} - Y_{t_k}) / Delta`.
    DiscretizedContinuous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationNoise {
    Covariance(DMatrix<f64>),
    Intensity(f64),
}

/// Observation map, noise and sampling interval.
#[derive(Clone)]
pub struct ObservationModel {
    dim: usize,
    map: VectorFn,
    jacobian: VectorFn,
    noise: ObservationNoise,
    interval: f64,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl fmt::Debug for ObservationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObservationModel")
            .field("dim", &self.dim)
            .field("noise", &self.noise)
            .field("interval", &self.interval)
            .finish_non_exhaustive()
    }
}

impl ObservationModel {
    /// Discrete-time observations with per-sample covariance `R`.
    pub fn discrete(
        dim: usize,
        map: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
        jacobian: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
        covariance: DMatrix<f64>,
        interval: f64,
    ) -> Result<Self> {
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::invalid(format!("covariance must be {dim}x{dim}")));
        }
        Self::build(
            dim,
            Arc::new(map),
            Arc::new(jacobian),
            ObservationNoise::Covariance(covariance.clone()),
            covariance,
            interval,
        )
    }

    /// Scalar discrete observation `y = h(x) + N(0, variance)`.
    pub fn discrete_scalar(
        map: impl Fn(f64) -> f64 + Send + Sync + 'static,
        jacobian: impl Fn(f64) -> f64 + Send + Sync + 'static,
        variance: f64,
        interval: f64,
    ) -> Result<Self> {
        Self::discrete(
            1,
            move |x, out| out[0] = map(x),
            move |x, out| out[0] = jacobian(x),
            DMatrix::from_element(1, 1, variance),
            interval,
        )
    }

    /// Discretized continuous observation with intensity `rho`; the
    /// averaged increment has covariance `rho^2 / Delta` per component.
    pub fn continuous(
        dim: usize,
        map: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
        jacobian: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
        intensity: f64,
        interval: f64,
    ) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::invalid("observation intensity must be positive"));
        }
        if !(interval > 0.0) {
            return Err(Error::invalid("observation interval must be positive"));
        }
        let cov = DMatrix::identity(dim, dim) * (intensity * intensity / interval);
        Self::build(
            dim,
            Arc::new(map),
            Arc::new(jacobian),
            ObservationNoise::Intensity(intensity),
            cov,
            interval,
        )
    }

    fn build(
        dim: usize,
        map: VectorFn,
        jacobian: VectorFn,
        noise: ObservationNoise,
        covariance: DMatrix<f64>,
        interval: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("observation dimension must be at least 1"));
        }
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::invalid("observation interval must be positive"));
        }
        let precision = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("observation covariance must be positive definite"))?
            .inverse();
        Ok(Self {
            dim,
            map,
            jacobian,
            noise,
            interval,
            covariance,
            precision,
        })
    }

    /// Same map and noise with a different sampling interval.
    pub fn with_interval(&self, interval: f64) -> Result<Self> {
        let covariance = match &self.noise {
            ObservationNoise::Covariance(c) => c.clone(),
            ObservationNoise::Intensity(rho) => {
                DMatrix::identity(self.dim, self.dim) * (rho * rho / interval)
            }
        };
        Self::build(
            self.dim,
            self.map.clone(),
            self.jacobian.clone(),
            self.noise.clone(),
            covariance,
            interval,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn noise(&self) -> &ObservationNoise {
        &self.noise
    }

    pub fn mode(&self) -> ObservationMode {
        match self.noise {
            ObservationNoise::Covariance(_) => ObservationMode::Discrete,
            ObservationNoise::Intensity(_) => ObservationMode::DiscretizedContinuous,
        }
    }

    /// Per-sample noise covariance: `R`, or `rho^2 / Delta * I`.
    pub fn effective_covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn observe(&self, x: f64, out: &mut [f64]) {
        (self.map)(x, out)
    }

    pub fn observe_vec(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.observe(x, &mut out);
        out
    }

    pub fn jacobian(&self, x: f64, out: &mut [f64]) {
        (self.jacobian)(x, out)
    }

    /// `log f(x, y) = h^T P y - h^T P h / 2` with `P` the inverse effective
    /// covariance. For the continuous mode this is `(Delta/rho^2)(h.y - |h|^2/2)`.
    pub fn log_likelihood(&self, x: f64, y: &[f64]) -> f64 {
        let mut h = vec![0.0; self.dim];
        self.log_likelihood_with(x, y, &mut h)
    }

    pub fn local_likelihood(&self, x: f64, y: &[f64]) -> f64 {
        self.log_likelihood(x, y).exp()
    }

    /// Fills `out[i] = log f(xs[i], y)`.
    pub fn log_likelihoods(&self, xs: &[f64], y: &[f64], out: &mut [f64]) {
        let mut h = vec![0.0; self.dim];
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.log_likelihood_with(x, y, &mut h);
        }
    }

    fn log_likelihood_with(&self, x: f64, y: &[f64], h: &mut [f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        self.observe(x, h);
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += h[i] * self.precision[(i, j)] * (y[j] - 0.5 * h[j]);
            }
        }
        acc
    }
}
