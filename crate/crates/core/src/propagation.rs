//! Gauss-Galerkin time stepping of the Fokker-Planck equation in
//! modified-moment space.
//!
//! Each step advances `m_k = <mu, p_k>` by `d/dt m_k = <mu^N, L p_k>`, the
//! right-hand side being a finite sum over the current Gauss atoms, and then
//! recomputes the atoms from the new moments.

use crate::error::{Error, Result};
use crate::model::ScalarDiffusion;
use crate::quadrature::{gauss_christoffel, DiscreteMeasure, MomentVector, RecurrenceBasis};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Any moment beyond this magnitude aborts the run.
pub const MOMENT_OVERFLOW: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    #[default]
    Rk2,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Scheme::Euler),
            "rk2" | "heun" => Ok(Scheme::Rk2),
            other => Err(Error::invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Rk2 => "rk2",
        })
    }
}

/// Uniform grid `t_l = l * delta`, `l = 0..=L`, optionally with observation
/// instants every `stride = L / K` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    obs_stride: Option<usize>,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon must be finite and non-negative"));
        }
        if steps > 0 && horizon == 0.0 {
            return Err(Error::invalid(
                "positive step count needs a positive horizon",
            ));
        }
        Ok(Self {
            horizon,
            steps,
            obs_stride: None,
        })
    }

    /// Grid with step `delta`; `horizon / delta` must be an integer.
    pub fn from_step(horizon: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("time step must be positive"));
        }
        let steps = divide_exactly(horizon, step).ok_or_else(|| {
            Error::invalid(format!("step {step} does not divide horizon {horizon}"))
        })?;
        Self::new(horizon, steps)
    }

    /// Adds observation instants every `interval`; it must be a multiple of
    /// the step and divide the horizon.
    pub fn with_obs_interval(self, interval: f64) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::invalid("observation interval must be positive"));
        }
        let count = divide_exactly(self.horizon, interval).ok_or_else(|| {
            Error::invalid(format!(
                "observation interval {interval} does not divide horizon {}",
                self.horizon
            ))
        })?;
        self.with_obs_count(count)
    }

    pub fn with_obs_count(mut self, count: usize) -> Result<Self> {
        if count == 0 || !self.steps.is_multiple_of(count) {
            return Err(Error::invalid(format!(
                "step count {} is not a multiple of observation count {count}",
                self.steps
            )));
        }
        self.obs_stride = Some(self.steps / count);
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon / self.steps as f64
        }
    }

    pub fn time(&self, index: usize) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon * index as f64 / self.steps as f64
        }
    }

    pub fn obs_count(&self) -> usize {
        self.obs_stride.map_or(0, |s| self.steps / s)
    }

    pub fn obs_stride(&self) -> Option<usize> {
        self.obs_stride
    }

    pub fn obs_interval(&self) -> Option<f64> {
        self.obs_stride.map(|s| s as f64 * self.step())
    }

    /// Observation index `k` (1-based) if step `l` is an observation instant.
    pub fn observation_at(&self, step: usize) -> Option<usize> {
        match self.obs_stride {
            Some(s) if step > 0 && step.is_multiple_of(s) => Some(step / s),
            _ => None,
        }
    }

    /// Grid step index of observation `k` (1-based).
    pub fn observation_step(&self, k: usize) -> Option<usize> {
        self.obs_stride.map(|s| k * s)
    }
}

fn divide_exactly(total: f64, part: f64) -> Option<usize> {
    let ratio = total / part;
    let n = ratio.round();
    if n < 0.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        None
    } else {
        Some(n as usize)
    }
}

/// Moments of the approximate law together with their Gauss atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussGalerkinState {
    pub time: f64,
    pub moments: MomentVector,
    pub measure: DiscreteMeasure,
}

impl GaussGalerkinState {
    pub fn from_moments(time: f64, moments: MomentVector, basis: &RecurrenceBasis) -> Result<Self> {
        let measure = gauss_christoffel(&moments, basis)?;
        Ok(Self {
            time,
            moments,
            measure,
        })
    }

    pub fn gauss_points(&self) -> usize {
        self.measure.len()
    }
}

/// Time derivative of the modified moments: component `k` is
/// `sum_i w_i (L p_k)(x_i)`.
pub fn fp_rhs(
    state: &GaussGalerkinState,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
) -> Vec<f64> {
    measure_rhs(&state.measure, state.moments.len(), model, basis)
}

fn measure_rhs(
    measure: &DiscreteMeasure,
    count: usize,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
) -> Vec<f64> {
    let mut rhs = vec![0.0; count];
    let mut v = vec![0.0; count];
    let mut d1 = vec![0.0; count];
    let mut d2 = vec![0.0; count];
    for (x, w) in measure.iter() {
        basis.eval_with_derivatives(x, &mut v, &mut d1, &mut d2);
        let b = model.drift(x);
        let half_a = 0.5 * model.diffusion_squared(x);
        for k in 1..count {
            rhs[k] += w * (b * d1[k] + half_a * d2[k]);
        }
    }
    rhs
}

fn advance(moments: &MomentVector, rates: &[(f64, &[f64])]) -> Result<MomentVector> {
    let mut values = moments.values().to_vec();
    for (scale, rate) in rates {
        for (v, r) in values.iter_mut().zip(rate.iter()) {
            *v += scale * r;
        }
    }
    if let Some((index, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.abs() <= MOMENT_OVERFLOW))
    {
        return Err(Error::Divergence { index, value });
    }
    MomentVector::new(values, moments.basis_id())
}

pub fn step_euler(
    state: &GaussGalerkinState,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
    dt: f64,
) -> Result<GaussGalerkinState> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("time step must be non-negative"));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let k1 = fp_rhs(state, model, basis);
    let moments = advance(&state.moments, &[(dt, &k1)])?;
    GaussGalerkinState::from_moments(state.time + dt, moments, basis)
}

/// Heun's method. The predictor moments are turned into a Gauss rule so the
/// second stage is evaluated on atoms, like the first.
pub fn step_rk2(
    state: &GaussGalerkinState,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
    dt: f64,
) -> Result<GaussGalerkinState> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("time step must be non-negative"));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let k1 = fp_rhs(state, model, basis);
    let predictor = advance(&state.moments, &[(dt, &k1)])?;
    let predictor_rule = gauss_christoffel(&predictor, basis)?;
    let k2 = measure_rhs(&predictor_rule, state.moments.len(), model, basis);
    let moments = advance(&state.moments, &[(0.5 * dt, &k1), (0.5 * dt, &k2)])?;
    GaussGalerkinState::from_moments(state.time + dt, moments, basis)
}

pub fn step(
    scheme: Scheme,
    state: &GaussGalerkinState,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
    dt: f64,
) -> Result<GaussGalerkinState> {
    match scheme {
        Scheme::Euler => step_euler(state, model, basis, dt),
        Scheme::Rk2 => step_rk2(state, model, basis, dt),
    }
}

/// Full run from the Gauss-Christoffel approximation of the initial law.
/// Returns `L + 1` states, one per grid time.
pub fn solve_fokker_planck(
    initial: &MomentVector,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<Vec<GaussGalerkinState>> {
    let mut state =
        GaussGalerkinState::from_moments(0.0, initial.clone(), basis).map_err(|e| e.at_step(0))?;
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let dt = grid.step();
    for l in 1..=grid.steps() {
        let mut next = step(scheme, &state, model, basis, dt).map_err(|e| e.at_step(l))?;
        next.time = grid.time(l);
        states.push(std::mem::replace(&mut state, next));
    }
    states.push(state);
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropagationOptions {
    pub scheme: Scheme,
    /// Retry the whole run with one Gauss point fewer after a quadrature
    /// breakdown, down to a single point.
    pub shrink_on_degeneracy: bool,
}

#[derive(Debug, Clone)]
pub struct FokkerPlanckRun {
    pub states: Vec<GaussGalerkinState>,
    pub gauss_points: usize,
}

pub fn solve_fokker_planck_with(
    initial: &MomentVector,
    model: &ScalarDiffusion,
    basis: &RecurrenceBasis,
    grid: &TimeGrid,
    options: PropagationOptions,
) -> Result<FokkerPlanckRun> {
    let mut n = initial.gauss_points();
    loop {
        let moments = initial.truncated(n)?;
        match solve_fokker_planck(&moments, model, basis, grid, options.scheme) {
            Ok(states) => {
                return Ok(FokkerPlanckRun {
                    states,
                    gauss_points: n,
                })
            }
            Err(e) if options.shrink_on_degeneracy && e.is_degeneracy() && n > 1 => {
                log::warn!("{n}-point run failed ({e}); retrying with {}", n - 1);
                n -= 1;
            }
            Err(e) => return Err(e),
        }
    }
}
