use crate::error::{Error, Result};
use crate::filter::ConditionalStats;
use crate::model::{InitialLaw, ModelCatalogEntry, ObservationModel, ScalarDiffusion};
use crate::propagation::TimeGrid;

/// Values below this are reported before being clipped to zero.
const NEGATIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Domain `[-M, M]`.
    pub half_width: f64,
    /// Number of cells `n`; the grid has `n + 1` points.
    pub intervals: usize,
    /// Cumulative fraction of mass allowed to leave through the boundary.
    pub leak_tolerance: f64,
    pub moment_orders: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            half_width: 6.0,
            intervals: 400,
            leak_tolerance: 0.01,
            moment_orders: 4,
        }
    }
}

/// Density sampled at `x_j = -M + j * 2M / n`, `j = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub half_width: f64,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.intervals() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// Trapezoid rule for `int g(x) p(x) dx`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.intervals();
        let inner: f64 = (1..n).map(|j| g(self.x(j)) * self.values[j]).sum();
        let ends = 0.5 * (g(self.x(0)) * self.values[0] + g(self.x(n)) * self.values[n]);
        (inner + ends) * self.dx()
    }

    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn stats(&self, time: f64, orders: usize) -> ConditionalStats {
        let mass = self.mass();
        let mean = self.integrate(|x| x) / mass;
        let variance = self.integrate(|x| (x - mean) * (x - mean)) / mass;
        let raw_moments = (1..=orders as i32)
            .map(|p| self.integrate(|x| x.powi(p)) / mass)
            .collect();
        ConditionalStats {
            time,
            mean,
            variance,
            raw_moments,
        }
    }

    /// `max_j |p_j - f(x_j)|`.
    pub fn sup_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.values.len())
            .map(|j| (self.values[j] - f(self.x(j))).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn gaussian_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Crank-Nicolson solver for `dp/dt = -(b p)' + (a p)'' / 2` on `[-M, M]`
/// with `p(+-M) = 0`, plus pointwise Bayes correction.
#[derive(Debug, Clone)]
pub struct FdSolver {
    density: GridDensity,
    dt: f64,
    // Operator rows for interior points: coefficients of p_{j-1}, p_j, p_{j+1}.
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    leaked: f64,
    leak_tolerance: f64,
    warned_negative: bool,
    scratch: Vec<f64>,
}

impl FdSolver {
    pub fn new(
        model: &ScalarDiffusion,
        initial: InitialLaw,
        options: &FdOptions,
        dt: f64,
    ) -> Result<Self> {
        let n = options.intervals;
        let m = options.half_width;
        if n < 100 {
            return Err(Error::invalid(format!(
                "finite-difference grid needs at least 100 cells, got {n}"
            )));
        }
        let sd = initial.variance.sqrt();
        if !(m.is_finite() && m >= initial.mean.abs() + 4.0 * sd) {
            return Err(Error::invalid(format!(
                "domain half-width {m} does not cover four prior standard deviations"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("time step must be positive"));
        }
        let mut density = GridDensity {
            half_width: m,
            values: vec![0.0; n + 1],
        };
        for j in 1..n {
            density.values[j] = gaussian_pdf(density.x(j), initial.mean, initial.variance);
        }
        let mass = density.mass();
        density.values.iter_mut().for_each(|p| *p /= mass);

        let dx = density.dx();
        let xs: Vec<f64> = (0..=n).map(|j| density.x(j)).collect();
        let b: Vec<f64> = xs.iter().map(|&x| model.drift(x)).collect();
        let a: Vec<f64> = xs.iter().map(|&x| model.diffusion_squared(x)).collect();
        let (mut lower, mut diag, mut upper) =
            (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
        for j in 1..n {
            lower[j] = b[j - 1] / (2.0 * dx) + 0.5 * a[j - 1] / (dx * dx);
            diag[j] = -a[j] / (dx * dx);
            upper[j] = -b[j + 1] / (2.0 * dx) + 0.5 * a[j + 1] / (dx * dx);
        }
        Ok(Self {
            density,
            dt,
            lower,
            diag,
            upper,
            leaked: 0.0,
            leak_tolerance: options.leak_tolerance,
            warned_negative: false,
            scratch: vec![0.0; n + 1],
        })
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    /// Cumulative mass lost through the boundary.
    pub fn leaked(&self) -> f64 {
        self.leaked
    }

    /// One Crank-Nicolson step followed by renormalization.
    pub fn predict(&mut self) -> Result<()> {
        let n = self.density.intervals();
        let h = 0.5 * self.dt;
        let p = &self.density.values;
        let rhs = &mut self.scratch;
        for j in 1..n {
            rhs[j] = p[j]
                + h * (self.lower[j] * p[j - 1] + self.diag[j] * p[j] + self.upper[j] * p[j + 1]);
        }
        // Thomas algorithm on the interior unknowns of (I - h A) p = rhs.
        let mut c = vec![0.0; n + 1];
        let mut d = vec![0.0; n + 1];
        for j in 1..n {
            let sub = if j > 1 { -h * self.lower[j] } else { 0.0 };
            let mid = 1.0 - h * self.diag[j];
            let sup = if j + 1 < n { -h * self.upper[j] } else { 0.0 };
            let denom = mid - sub * c[j - 1];
            c[j] = sup / denom;
            d[j] = (rhs[j] - sub * d[j - 1]) / denom;
        }
        let p = &mut self.density.values;
        p[n - 1] = d[n - 1];
        for j in (1..n - 1).rev() {
            p[j] = d[j] - c[j] * p[j + 1];
        }
        self.clip_negative();
        let mass = self.density.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::NumericalFailure(
                "finite-difference density vanished".into(),
            ));
        }
        self.leaked += (1.0 - mass).max(0.0);
        if self.leaked > self.leak_tolerance {
            return Err(Error::DomainTooSmall {
                leaked: self.leaked,
            });
        }
        self.density.values.iter_mut().for_each(|v| *v /= mass);
        Ok(())
    }

    fn clip_negative(&mut self) {
        let min = self.density.values.iter().copied().fold(0.0, f64::min);
        if min < -NEGATIVITY_TOL && !self.warned_negative {
            log::warn!("finite-difference density went negative ({min:e}); clipping");
            self.warned_negative = true;
        }
        self.density.values.iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// Multiplies by `f(x_j, y)` in log space and renormalizes. Returns the
    /// log of the normalizing constant.
    pub fn correct(&mut self, obs: &ObservationModel, y: &[f64], time: f64) -> Result<f64> {
        let n = self.density.intervals();
        let xs: Vec<f64> = (0..=n).map(|j| self.density.x(j)).collect();
        let log_f = &mut self.scratch;
        obs.log_likelihoods(&xs, y, log_f);
        let shift = (0..=n)
            .filter(|&j| self.density.values[j] > 0.0)
            .map(|j| log_f[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::LikelihoodCollapse { time });
        }
        for (p, l) in self.density.values.iter_mut().zip(log_f.iter()) {
            *p *= (l - shift).exp();
        }
        let mass = self.density.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::LikelihoodCollapse { time });
        }
        self.density.values.iter_mut().for_each(|v| *v /= mass);
        Ok(mass.ln() + shift)
    }
}

#[derive(Debug, Clone)]
pub struct FdRun {
    /// One entry per grid time.
    pub stats: Vec<ConditionalStats>,
    pub final_density: GridDensity,
    pub leaked: f64,
}

/// Finite-difference solution of the filtering problem by splitting:
/// a Fokker-Planck step per grid step, then the Bayes factor at
/// observation instants.
pub fn fd_zakai(
    model: &ModelCatalogEntry,
    ys: &[Vec<f64>],
    grid: &TimeGrid,
    options: &FdOptions,
) -> Result<FdRun> {
    if ys.len() != grid.obs_count() {
        return Err(Error::invalid(format!(
            "grid has {} observation instants, got {} observations",
            grid.obs_count(),
            ys.len()
        )));
    }
    let obs = &model.observation;
    if let Some(k) = ys.iter().position(|y| y.len() != obs.dim()) {
        return Err(Error::invalid(format!(
            "observation {} has wrong dimension",
            k + 1
        )));
    }
    let steps = grid.steps().max(1);
    let mut solver = FdSolver::new(
        &model.diffusion,
        model.initial_law,
        options,
        grid.horizon() / steps as f64,
    )?;
    let orders = options.moment_orders;
    let mut stats = Vec::with_capacity(grid.steps() + 1);
    stats.push(solver.density().stats(0.0, orders));
    for l in 1..=grid.steps() {
        let t = grid.time(l);
        solver.predict().map_err(|e| e.at_step(l))?;
        if let Some(k) = grid.observation_at(l) {
            solver
                .correct(obs, &ys[k - 1], t)
                .map_err(|e| Error::Correction {
                    step: l,
                    obs_index: k,
                    source: Box::new(e),
                })?;
        }
        stats.push(solver.density().stats(t, orders));
    }
    Ok(FdRun {
        stats,
        leaked: solver.leaked(),
        final_density: solver.density,
    })
}
