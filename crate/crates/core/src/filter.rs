//! Gauss-Galerkin nonlinear filter.
//!
//! Between observation instants the conditional law is predicted with the
//! moment dynamics of [`crate::propagation`]. At an observation the atoms
//! are reweighted by the local likelihood (Bayes' rule restricted to the
//! atoms), the modified moments of the reweighted measure are recomputed,
//! and, by default, the Gauss rule is rebuilt from those moments.

use crate::error::{Error, Result};
use crate::model::{ModelCatalogEntry, ObservationModel};
use crate::propagation::{self, GaussGalerkinState, Scheme, TimeGrid};
use crate::quadrature::{
    gauss_christoffel, gaussian_modified_moments, weighted_basis_sums, DiscreteMeasure,
    MomentVector, RecurrenceBasis,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub state: GaussGalerkinState,
    /// Number of observations absorbed so far.
    pub obs_index: usize,
    /// Running sum of `log <eta, f(., y_k)>`.
    pub log_normalizer: f64,
}

impl FilterState {
    pub fn new(state: GaussGalerkinState) -> Self {
        Self {
            state,
            obs_index: 0,
            log_normalizer: 0.0,
        }
    }
}

/// Conditional mean, variance and raw moments `<nu, x^p>`, `p = 1..=P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalStats {
    pub time: f64,
    pub mean: f64,
    pub variance: f64,
    pub raw_moments: Vec<f64>,
}

impl ConditionalStats {
    pub fn from_measure(time: f64, measure: &DiscreteMeasure, orders: usize) -> Self {
        let mass = measure.mass();
        let mean = measure.integrate(|x| x) / mass;
        let variance = measure.integrate(|x| (x - mean) * (x - mean)) / mass;
        let raw_moments = (1..=orders as u32)
            .map(|p| measure.raw_moment(p) / mass)
            .collect();
        Self {
            time,
            mean,
            variance,
            raw_moments,
        }
    }

    /// Statistics of `N(mean, variance)`.
    pub fn from_gaussian(time: f64, mean: f64, variance: f64, orders: usize) -> Self {
        // E[X^p] = mean E[X^{p-1}] + (p-1) variance E[X^{p-2}]
        let mut raw = Vec::with_capacity(orders);
        let (mut older, mut prev) = (0.0, 1.0);
        for p in 1..=orders {
            let next = mean * prev + (p - 1) as f64 * variance * older;
            raw.push(next);
            older = prev;
            prev = next;
        }
        Self {
            time,
            mean,
            variance,
            raw_moments: raw,
        }
    }
}

/// Bayes correction of the current atoms by `f(., y)`.
///
/// The likelihood is evaluated in log space and shifted by its maximum
/// before exponentiation, so distant observations do not underflow.
/// With `requadrature` the Gauss rule of the corrected moments replaces the
/// reweighted atoms.
pub fn correct(
    current: &FilterState,
    obs: &ObservationModel,
    y: &[f64],
    basis: &RecurrenceBasis,
    requadrature: bool,
) -> Result<FilterState> {
    if y.len() != obs.dim() {
        return Err(Error::invalid(format!(
            "observation has dimension {}, model expects {}",
            y.len(),
            obs.dim()
        )));
    }
    let measure = &current.state.measure;
    let mut log_f = vec![0.0; measure.len()];
    obs.log_likelihoods(measure.nodes(), y, &mut log_f);
    correct_with_log_likelihood(current, &log_f, basis, requadrature)
}

/// Correction step with precomputed `log f(x_i, y)` for each atom.
pub fn correct_with_log_likelihood(
    current: &FilterState,
    log_f: &[f64],
    basis: &RecurrenceBasis,
    requadrature: bool,
) -> Result<FilterState> {
    let measure = &current.state.measure;
    let time = current.state.time;
    if log_f.len() != measure.len() {
        return Err(Error::invalid("one log-likelihood per atom required"));
    }
    let shift = log_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::LikelihoodCollapse { time });
    }
    let scaled: Vec<f64> = measure
        .weights()
        .iter()
        .zip(log_f)
        .map(|(w, l)| w * (l - shift).exp())
        .collect();
    let total: f64 = scaled.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::LikelihoodCollapse { time });
    }
    let weights: Vec<f64> = scaled.iter().map(|w| w / total).collect();

    let count = current.state.moments.len();
    let mut values = weighted_basis_sums(measure.nodes(), &weights, basis, count);
    values[0] = 1.0;
    let moments = MomentVector::new(values, basis.id())?;
    let measure = if requadrature {
        gauss_christoffel(&moments, basis)?
    } else {
        DiscreteMeasure::new(measure.nodes().to_vec(), weights)?
    };

    Ok(FilterState {
        state: GaussGalerkinState {
            time,
            moments,
            measure,
        },
        obs_index: current.obs_index + 1,
        log_normalizer: current.log_normalizer + total.ln() + shift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    pub scheme: Scheme,
    /// Rebuild the Gauss rule after each correction (default) instead of
    /// carrying the reweighted atoms into the next prediction.
    pub requadrature: bool,
    /// Retry the run with one Gauss point fewer after a quadrature breakdown.
    pub shrink_on_degeneracy: bool,
    /// Highest raw conditional moment to report.
    pub moment_orders: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk2,
            requadrature: true,
            shrink_on_degeneracy: false,
            moment_orders: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    /// One entry per grid time, `t_0 ..= t_L`.
    pub stats: Vec<ConditionalStats>,
    pub gauss_points: usize,
    pub final_state: FilterState,
}

/// Prediction/correction loop from the Gauss-Christoffel approximation of
/// the initial law. `observations[k - 1]` is applied at grid step
/// `k * L / K`.
pub fn run_filter(
    model: &ModelCatalogEntry,
    observations: &[Vec<f64>],
    grid: &TimeGrid,
    gauss_points: usize,
    options: FilterOptions,
) -> Result<FilterRun> {
    let mut n = gauss_points;
    loop {
        match run_filter_once(model, observations, grid, n, options) {
            Err(e) if options.shrink_on_degeneracy && e.is_degeneracy() && n > 1 => {
                log::warn!("{n}-point filter failed ({e}); retrying with {}", n - 1);
                n -= 1;
            }
            other => return other,
        }
    }
}

fn run_filter_once(
    model: &ModelCatalogEntry,
    observations: &[Vec<f64>],
    grid: &TimeGrid,
    n: usize,
    options: FilterOptions,
) -> Result<FilterRun> {
    if n == 0 {
        return Err(Error::invalid("need at least one Gauss point"));
    }
    if options.moment_orders > 2 * n - 1 {
        return Err(Error::invalid(format!(
            "moment order {} exceeds 2N-1 = {}",
            options.moment_orders,
            2 * n - 1
        )));
    }
    if grid.obs_count() != observations.len() {
        return Err(Error::invalid(format!(
            "grid has {} observation instants, got {} observations",
            grid.obs_count(),
            observations.len()
        )));
    }
    let obs = &model.observation;
    if let Some(k) = observations.iter().position(|y| y.len() != obs.dim()) {
        return Err(Error::invalid(format!(
            "observation {} has wrong dimension",
            k + 1
        )));
    }

    let basis = RecurrenceBasis::hermite_for_points(n)?;
    let law = model.initial_law;
    let initial = gaussian_modified_moments(law.mean, law.variance, &basis, 2 * n)?;
    let state = GaussGalerkinState::from_moments(0.0, initial, &basis).map_err(|e| e.at_step(0))?;
    let mut current = FilterState::new(state);

    let mut stats = Vec::with_capacity(grid.steps() + 1);
    stats.push(ConditionalStats::from_measure(
        0.0,
        &current.state.measure,
        options.moment_orders,
    ));
    let dt = grid.step();
    for l in 1..=grid.steps() {
        let mut predicted =
            propagation::step(options.scheme, &current.state, &model.diffusion, &basis, dt)
                .map_err(|e| e.at_step(l))?;
        predicted.time = grid.time(l);
        current = FilterState {
            state: predicted,
            ..current
        };
        if let Some(k) = grid.observation_at(l) {
            current = correct(
                &current,
                obs,
                &observations[k - 1],
                &basis,
                options.requadrature,
            )
            .map_err(|e| Error::Correction {
                step: l,
                obs_index: k,
                source: Box::new(e),
            })?;
        }
        stats.push(ConditionalStats::from_measure(
            current.state.time,
            &current.state.measure,
            options.moment_orders,
        ));
    }
    Ok(FilterRun {
        stats,
        gauss_points: n,
        final_state: current,
    })
}
