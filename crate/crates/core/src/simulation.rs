//! Seeded ground truth: Euler-Maruyama state paths and noisy observations.
//!
//! Each seed drives a ChaCha20 generator. The initial condition, the state
//! noise and the observation noise use separate streams of that generator,
//! so regenerating observations never perturbs the path.

use crate::error::{Error, Result};
use crate::model::{InitialLaw, ModelCatalogEntry, ObservationModel, ScalarDiffusion};
use crate::propagation::TimeGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

const INITIAL_STREAM: u64 = 0;
const STATE_STREAM: u64 = 1;
const OBSERVATION_STREAM: u64 = 2;

fn substream(seed: u64, label: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// `X_0 ~ mu_0`, then `X_{l+1} = X_l + b(X_l) delta + sigma(X_l) sqrt(delta) xi_l`.
/// Returns `L + 1` values.
pub fn simulate_state(
    model: &ScalarDiffusion,
    initial: InitialLaw,
    grid: &TimeGrid,
    seed: u64,
) -> Vec<f64> {
    let mut init_rng = substream(seed, INITIAL_STREAM);
    let mut rng = substream(seed, STATE_STREAM);
    let z: f64 = init_rng.sample(StandardNormal);
    let mut x = initial.mean + initial.variance.sqrt() * z;
    let dt = grid.step();
    let sq = dt.sqrt();
    let mut path = Vec::with_capacity(grid.steps() + 1);
    path.push(x);
    for _ in 0..grid.steps() {
        let xi: f64 = rng.sample(StandardNormal);
        x += model.drift(x) * dt + model.diffusion(x) * sq * xi;
        path.push(x);
    }
    path
}

fn check_path(path: &[f64], grid: &TimeGrid) -> Result<()> {
    if path.len() != grid.steps() + 1 {
        return Err(Error::invalid(format!(
            "path has {} points, grid needs {}",
            path.len(),
            grid.steps() + 1
        )));
    }
    Ok(())
}

/// `y_k = h(X_{t_k}) + v_k` with `v_k ~ N(0, R_eff)`.
pub fn simulate_observations(
    obs: &ObservationModel,
    path: &[f64],
    grid: &TimeGrid,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_path(path, grid)?;
    let d = obs.dim();
    let chol = obs
        .effective_covariance()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("observation covariance must be positive definite"))?;
    let l = chol.l();
    let mut rng = substream(seed, OBSERVATION_STREAM);
    let mut z = vec![0.0; d];
    let mut out = Vec::with_capacity(grid.obs_count());
    for k in 1..=grid.obs_count() {
        let step = grid.observation_step(k).expect("grid has observations");
        let mut y = obs.observe_vec(path[step]);
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for i in 0..d {
            y[i] += (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
        }
        out.push(y);
    }
    Ok(out)
}

/// `y_k = h(X_{t_k})` exactly.
pub fn noiseless_observations(
    obs: &ObservationModel,
    path: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    check_path(path, grid)?;
    Ok((1..=grid.obs_count())
        .map(|k| obs.observe_vec(path[grid.observation_step(k).expect("grid has observations")]))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: String,
    pub seed: u64,
    pub grid: TimeGrid,
    /// `X` at every grid time.
    pub path: Vec<f64>,
    /// `y_1..y_K`.
    pub observations: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn generate(model: &ModelCatalogEntry, grid: &TimeGrid, seed: u64) -> Result<Self> {
        let path = simulate_state(&model.diffusion, model.initial_law, grid, seed);
        let observations = simulate_observations(&model.observation, &path, grid, seed)?;
        Ok(Self {
            model: model.name.clone(),
            seed,
            grid: *grid,
            path,
            observations,
        })
    }
}
