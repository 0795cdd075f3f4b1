use super::GaussianBelief;
use crate::error::{Error, Result};
use crate::model::{ModelCatalogEntry, ScalarDiffusion};
use crate::propagation::{Scheme, TimeGrid};
use nalgebra::{DMatrix, DVector};

fn rates(model: &ScalarDiffusion, m: f64, p: f64) -> (f64, f64) {
    (
        model.drift(m),
        2.0 * model.drift_jacobian(m) * p + model.diffusion_squared(m),
    )
}

fn propagate(
    model: &ScalarDiffusion,
    scheme: Scheme,
    b: GaussianBelief,
    dt: f64,
) -> Result<GaussianBelief> {
    let (m, p) = (b.mean, b.variance);
    let (dm1, dp1) = rates(model, m, p);
    let (m, p) = match scheme {
        Scheme::Euler => (m + dt * dm1, p + dt * dp1),
        Scheme::Rk2 => {
            let (dm2, dp2) = rates(model, m + dt * dm1, p + dt * dp1);
            (m + 0.5 * dt * (dm1 + dm2), p + 0.5 * dt * (dp1 + dp2))
        }
    };
    GaussianBelief::new(m, p)
}

/// Continuous-discrete extended Kalman filter. Mean and variance follow the
/// linearized moment equations on the grid with the given scheme; at each
/// observation the update uses the Jacobian at the predicted mean and the
/// effective per-sample covariance. Returns `L + 1` beliefs.
pub fn ekf(
    model: &ModelCatalogEntry,
    ys: &[Vec<f64>],
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<Vec<GaussianBelief>> {
    let obs = &model.observation;
    let d = obs.dim();
    if ys.len() != grid.obs_count() {
        return Err(Error::invalid(format!(
            "grid has {} observation instants, got {} observations",
            grid.obs_count(),
            ys.len()
        )));
    }
    let r = obs.effective_covariance();
    let law = model.initial_law;
    let mut belief = GaussianBelief::new(law.mean, law.variance)?;
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(belief);
    let mut h = vec![0.0; d];
    let mut jac = vec![0.0; d];
    for l in 1..=grid.steps() {
        belief =
            propagate(&model.diffusion, scheme, belief, grid.step()).map_err(|e| e.at_step(l))?;
        if let Some(k) = grid.observation_at(l) {
            let y = &ys[k - 1];
            if y.len() != d {
                return Err(Error::invalid(format!(
                    "observation {k} has wrong dimension"
                )));
            }
            obs.observe(belief.mean, &mut h);
            obs.jacobian(belief.mean, &mut jac);
            let hv = DVector::from_column_slice(&jac);
            let p = belief.variance;
            let s: DMatrix<f64> = &hv * hv.transpose() * p + r;
            let s_inv = s.cholesky().map(|c| c.inverse()).ok_or_else(|| {
                Error::NumericalFailure(format!(
                    "singular innovation covariance at observation {k}"
                ))
            })?;
            let gain = s_inv * &hv * p;
            let innovation = DVector::from_iterator(d, y.iter().zip(&h).map(|(y, h)| y - h));
            let mean = belief.mean + gain.dot(&innovation);
            let variance = p * (1.0 - gain.dot(&hv));
            belief = GaussianBelief::new(mean, variance).map_err(|e| e.at_step(l))?;
        }
        out.push(belief);
    }
    Ok(out)
}
