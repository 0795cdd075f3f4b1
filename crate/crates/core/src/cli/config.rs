use crate::model::{lookup, CatalogParams, InitialLaw, ModelCatalogEntry};
use crate::propagation::{Scheme, TimeGrid};
use crate::reference::FdOptions;
use serde::Deserialize;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gga,
    Fd,
    Ekf,
    Kalman,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gga => "gga",
            Method::Fd => "fd",
            Method::Ekf => "ekf",
            Method::Kalman => "kalman",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GgaSection {
    pub requadrature: bool,
    pub shrink_on_degeneracy: bool,
}

impl Default for GgaSection {
    fn default() -> Self {
        Self {
            requadrature: true,
            shrink_on_degeneracy: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdSection {
    pub half_width: f64,
    pub intervals: usize,
    pub leak_tolerance: f64,
}

impl Default for FdSection {
    fn default() -> Self {
        let d = FdOptions::default();
        Self {
            half_width: d.half_width,
            intervals: d.intervals,
            leak_tolerance: d.leak_tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EkfSection {
    /// Defaults to the experiment scheme.
    pub scheme: Option<Scheme>,
}

/// Experiment description read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    pub gauss_points: usize,
    pub horizon: f64,
    pub step: f64,
    pub obs_interval: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    pub rho: Option<f64>,
    pub obs_variance: Option<f64>,
    pub brownian_sigma: Option<f64>,
    #[serde(default)]
    pub initial_mean: f64,
    #[serde(default = "one")]
    pub initial_variance: f64,
    #[serde(default)]
    pub seed: u64,
    pub methods: Option<Vec<Method>>,
    pub moment_orders: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Scenario CSV to replay instead of simulating.
    pub replay: Option<PathBuf>,
    #[serde(default)]
    pub gga: GgaSection,
    #[serde(default)]
    pub fd: FdSection,
    #[serde(default)]
    pub ekf: EkfSection,
}

fn one() -> f64 {
    1.0
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// Invalid configuration; maps to exit code 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// Highest reported raw moment; defaults to `min(4, 2N - 1)`.
    pub fn orders(&self) -> usize {
        self.moment_orders
            .unwrap_or_else(|| 4.min(2 * self.gauss_points.max(1) - 1))
    }

    fn check_common(&self) -> Result<(), ConfigError> {
        if self.gauss_points < 1 {
            return Err(bad("gauss_points must be at least 1"));
        }
        let p = self.orders();
        if p > 2 * self.gauss_points - 1 {
            return Err(bad(format!(
                "moment_orders = {p} exceeds 2N-1 = {} for N = {}",
                2 * self.gauss_points - 1,
                self.gauss_points
            )));
        }
        if !(self.initial_variance > 0.0) {
            return Err(bad("initial_variance must be positive"));
        }
        Ok(())
    }

    /// Grid without observations, for Fokker-Planck runs.
    pub fn propagation_grid(&self) -> Result<TimeGrid, ConfigError> {
        self.check_common()?;
        TimeGrid::from_step(self.horizon, self.step)
            .map_err(|e| bad(format!("horizon/step: {}", e.root())))
    }

    /// Full filtering grid. Requires `obs_interval` and a non-empty method list.
    pub fn filter_grid(&self) -> Result<TimeGrid, ConfigError> {
        let grid = self.propagation_grid()?;
        match &self.methods {
            Some(m) if !m.is_empty() => {}
            _ => {
                return Err(bad(
                    "methods must list at least one of gga, fd, ekf, kalman",
                ))
            }
        }
        let interval = self
            .obs_interval
            .ok_or_else(|| bad("obs_interval is required for filtering"))?;
        grid.with_obs_interval(interval)
            .map_err(|e| bad(format!("obs_interval: {}", e.root())))
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone().unwrap_or_default();
        m.sort();
        m.dedup();
        m
    }

    pub fn catalog_params(&self) -> CatalogParams {
        let d = CatalogParams::default();
        CatalogParams {
            obs_variance: self.obs_variance.unwrap_or(d.obs_variance),
            intensity: self.rho.unwrap_or(d.intensity),
            brownian_sigma: self.brownian_sigma.unwrap_or(d.brownian_sigma),
            obs_interval: self.obs_interval.unwrap_or(self.step),
            initial_law: InitialLaw {
                mean: self.initial_mean,
                variance: self.initial_variance,
            },
        }
    }

    pub fn model_entry(&self) -> Result<ModelCatalogEntry, ConfigError> {
        lookup(&self.model, &self.catalog_params()).map_err(|e| bad(e.root().to_string()))
    }

    pub fn fd_options(&self) -> FdOptions {
        FdOptions {
            half_width: self.fd.half_width,
            intervals: self.fd.intervals,
            leak_tolerance: self.fd.leak_tolerance,
            moment_orders: self.orders(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
model = "circular"
gauss_points = 10
horizon = 10.0
obs_interval = 0.01
step = 0.01
rho = 0.5
seed = 1
methods = ["gga", "fd", "ekf"]
"#;

    #[test]
    fn parses_benchmark_config() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        let g = c.filter_grid().unwrap();
        assert_eq!(g.steps(), 1000);
        assert_eq!(g.obs_count(), 1000);
        assert_eq!(c.methods(), vec![Method::Gga, Method::Fd, Method::Ekf]);
        assert_eq!(c.orders(), 4);
        assert_eq!(c.scheme, Scheme::Rk2);
        assert_eq!(c.catalog_params().intensity, 0.5);
        assert!(c.gga.requadrature);
        assert_eq!(c.fd.intervals, 400);
    }

    #[test]
    fn validation_errors() {
        let with = |extra: &str| ExperimentConfig::from_toml(&format!("{BASE}\n{extra}"));
        assert!(with("moment_orders = 20").unwrap().filter_grid().is_err());
        let empty = BASE.replace(r#"methods = ["gga", "fd", "ekf"]"#, "methods = []");
        assert!(ExperimentConfig::from_toml(&empty)
            .unwrap()
            .filter_grid()
            .is_err());
        let uneven = BASE.replace("obs_interval = 0.01", "obs_interval = 0.015");
        assert!(ExperimentConfig::from_toml(&uneven)
            .unwrap()
            .filter_grid()
            .is_err());
        let zero = BASE.replace("gauss_points = 10", "gauss_points = 0");
        assert!(ExperimentConfig::from_toml(&zero)
            .unwrap()
            .filter_grid()
            .is_err());
        assert!(with("unknown_key = 3").is_err());
        assert!(with("[fd]\nintervals = \"many\"").is_err());
        let wrong_model = BASE.replace("circular", "sphere");
        assert!(ExperimentConfig::from_toml(&wrong_model)
            .unwrap()
            .model_entry()
            .is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let c = ExperimentConfig::from_toml(&format!(
            "{BASE}\n[gga]\nrequadrature = false\n[fd]\nhalf_width = 8.0\n[ekf]\nscheme = \"euler\""
        ))
        .unwrap();
        assert!(!c.gga.requadrature);
        assert_eq!(c.fd_options().half_width, 8.0);
        assert_eq!(c.ekf.scheme, Some(Scheme::Euler));
    }
}
