use super::GaussianBelief;
use crate::error::{Error, Result};
use crate::model::{InitialLaw, LinearGaussian};
use crate::propagation::TimeGrid;

/// Mean factor and added variance of the exact transition over `dt`.
fn transition(model: &LinearGaussian, dt: f64) -> (f64, f64) {
    let a = model.rate;
    let s2 = model.sigma * model.sigma;
    let noise = if a == 0.0 {
        s2 * dt
    } else {
        s2 * -(-2.0 * a * dt).exp_m1() / (2.0 * a)
    };
    ((-a * dt).exp(), noise)
}

fn predict(belief: GaussianBelief, model: &LinearGaussian, dt: f64) -> Result<GaussianBelief> {
    let (factor, noise) = transition(model, dt);
    GaussianBelief::new(
        factor * belief.mean,
        factor * factor * belief.variance + noise,
    )
}

fn update(belief: GaussianBelief, model: &LinearGaussian, y: f64) -> Result<GaussianBelief> {
    let c = model.gain;
    let r = model.obs_variance;
    let s = c * c * belief.variance + r;
    let gain = belief.variance * c / s;
    GaussianBelief::new(
        belief.mean + gain * (y - c * belief.mean),
        belief.variance * r / s,
    )
}

fn validate(model: &LinearGaussian) -> Result<()> {
    if !(model.rate.is_finite() && model.sigma.is_finite() && model.gain.is_finite()) {
        return Err(Error::invalid("linear model coefficients must be finite"));
    }
    if !(model.obs_variance > 0.0) {
        return Err(Error::invalid("observation variance must be positive"));
    }
    Ok(())
}

/// Kalman filter with the exact OU transition between observations spaced
/// `interval` apart. Returns `K + 1` beliefs, the first being the prior.
/// With `update = false` the observations are ignored.
pub fn kalman_exact(
    model: &LinearGaussian,
    initial: InitialLaw,
    interval: f64,
    ys: &[f64],
    update_on_obs: bool,
) -> Result<Vec<GaussianBelief>> {
    validate(model)?;
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(Error::invalid("observation interval must be positive"));
    }
    let mut belief = GaussianBelief::new(initial.mean, initial.variance)?;
    let mut out = Vec::with_capacity(ys.len() + 1);
    out.push(belief);
    for &y in ys {
        belief = predict(belief, model, interval)?;
        if update_on_obs {
            belief = update(belief, model, y)?;
        }
        out.push(belief);
    }
    Ok(out)
}

/// Same filter evaluated at every grid time; observation `k` is absorbed at
/// step `k * L / K`.
pub fn kalman_on_grid(
    model: &LinearGaussian,
    initial: InitialLaw,
    grid: &TimeGrid,
    ys: &[Vec<f64>],
) -> Result<Vec<GaussianBelief>> {
    validate(model)?;
    if ys.len() != grid.obs_count() {
        return Err(Error::invalid(format!(
            "grid has {} observation instants, got {} observations",
            grid.obs_count(),
            ys.len()
        )));
    }
    let dt = grid.step();
    let mut belief = GaussianBelief::new(initial.mean, initial.variance)?;
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(belief);
    for l in 1..=grid.steps() {
        belief = predict(belief, model, dt)?;
        if let Some(k) = grid.observation_at(l) {
            let y = &ys[k - 1];
            if y.len() != 1 {
                return Err(Error::invalid("linear model takes scalar observations"));
            }
            belief = update(belief, model, y[0])?;
        }
        out.push(belief);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const OU: LinearGaussian = LinearGaussian {
        rate: 1.0,
        sigma: std::f64::consts::SQRT_2,
        gain: 1.0,
        obs_variance: 1.0,
    };

    #[test]
    fn unobserved_variance_reaches_stationary_value() {
        let model = LinearGaussian {
            sigma: 0.6,
            rate: 2.0,
            ..OU
        };
        let init = InitialLaw {
            mean: 3.0,
            variance: 0.01,
        };
        let out = kalman_exact(&model, init, 0.1, &[0.0; 200], false).unwrap();
        let last = out.last().unwrap();
        assert_abs_diff_eq!(last.variance, 0.36 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(last.mean, 0.0, epsilon = 1e-12);
        assert_eq!(out.len(), 201);
    }

    #[test]
    fn conjugate_update_after_long_gap() {
        let out = kalman_exact(
            &OU,
            InitialLaw {
                mean: 5.0,
                variance: 7.0,
            },
            50.0,
            &[0.0],
            true,
        )
        .unwrap();
        assert_abs_diff_eq!(out[1].variance, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(kalman_exact(&OU, InitialLaw::STANDARD, 0.0, &[1.0], true).is_err());
        let bad = LinearGaussian {
            obs_variance: 0.0,
            ..OU
        };
        assert!(kalman_exact(&bad, InitialLaw::STANDARD, 0.1, &[1.0], true).is_err());
    }

    #[test]
    fn brownian_limit() {
        let bm = LinearGaussian {
            rate: 0.0,
            sigma: 2.0,
            ..OU
        };
        let out = kalman_exact(&bm, InitialLaw::STANDARD, 0.5, &[0.0; 4], false).unwrap();
        assert_abs_diff_eq!(out[4].variance, 1.0 + 4.0 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_version_agrees_at_observation_times() {
        let grid = TimeGrid::from_step(1.0, 0.01)
            .unwrap()
            .with_obs_interval(0.05)
            .unwrap();
        let ys: Vec<f64> = (0..grid.obs_count())
            .map(|k| (k as f64 * 0.7).sin())
            .collect();
        let wrapped: Vec<Vec<f64>> = ys.iter().map(|&y| vec![y]).collect();
        let coarse = kalman_exact(&OU, InitialLaw::STANDARD, 0.05, &ys, true).unwrap();
        let fine = kalman_on_grid(&OU, InitialLaw::STANDARD, &grid, &wrapped).unwrap();
        assert_eq!(fine.len(), 101);
        for (k, b) in coarse.iter().enumerate() {
            let f = fine[k * 5];
            assert_abs_diff_eq!(f.mean, b.mean, epsilon = 1e-13);
            assert_abs_diff_eq!(f.variance, b.variance, epsilon = 1e-13);
        }
    }
}
