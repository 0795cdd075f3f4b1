use super::{ObservationModel, ScalarDiffusion};
use crate::error::{Error, Result};

/// Gaussian initial law `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialLaw {
    pub mean: f64,
    pub variance: f64,
}

impl InitialLaw {
    pub const STANDARD: InitialLaw = InitialLaw {
        mean: 0.0,
        variance: 1.0,
    };
}

/// Linear-Gaussian description `dX = -rate X dt + sigma dW`, `y = gain X + v`,
/// `v ~ N(0, obs_variance)` per sample, for the exact Kalman oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussian {
    pub rate: f64,
    pub sigma: f64,
    pub gain: f64,
    pub obs_variance: f64,
}

/// Tunable parameters of the built-in models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogParams {
    /// `R` for the discrete linear observation.
    pub obs_variance: f64,
    /// `rho` for the circular observation.
    pub intensity: f64,
    /// Constant diffusion coefficient of the Brownian model.
    pub brownian_sigma: f64,
    pub obs_interval: f64,
    pub initial_law: InitialLaw,
}

impl Default for CatalogParams {
    fn default() -> Self {
        Self {
            obs_variance: 1.0,
            intensity: 0.5,
            brownian_sigma: 2f64.sqrt(),
            obs_interval: 0.01,
            initial_law: InitialLaw::STANDARD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelCatalogEntry {
    pub name: String,
    pub diffusion: ScalarDiffusion,
    pub observation: ObservationModel,
    pub initial_law: InitialLaw,
    /// Present when the system is linear-Gaussian.
    pub linear: Option<LinearGaussian>,
}

impl ModelCatalogEntry {
    /// Same system with the observation map replaced by `h = 0`, keeping
    /// noise and interval.
    pub fn without_information(&self) -> Result<Self> {
        let obs = &self.observation;
        let dim = obs.dim();
        let blank = ObservationModel::discrete(
            dim,
            |_, o| o.fill(0.0),
            |_, o| o.fill(0.0),
            obs.effective_covariance().clone(),
            obs.interval(),
        )?;
        Ok(Self {
            name: format!("{}-blind", self.name),
            observation: blank,
            linear: None,
            ..self.clone()
        })
    }
}

pub const CATALOG_NAMES: [&str; 3] = ["ou-linear", "circular", "brownian"];

/// `ou-linear`, `circular` and `brownian`.
pub fn builtin_catalog(params: &CatalogParams) -> Result<Vec<ModelCatalogEntry>> {
    CATALOG_NAMES.iter().map(|n| lookup(n, params)).collect()
}

pub fn lookup(name: &str, params: &CatalogParams) -> Result<ModelCatalogEntry> {
    let sqrt2 = 2f64.sqrt();
    let dt = params.obs_interval;
    let entry = match name {
        "ou-linear" => ModelCatalogEntry {
            name: name.into(),
            diffusion: ScalarDiffusion::ornstein_uhlenbeck(1.0, sqrt2),
            observation: ObservationModel::discrete_scalar(
                |x| x,
                |_| 1.0,
                params.obs_variance,
                dt,
            )?,
            initial_law: params.initial_law,
            linear: Some(LinearGaussian {
                rate: 1.0,
                sigma: sqrt2,
                gain: 1.0,
                obs_variance: params.obs_variance,
            }),
        },
        // dY = exp(iX) dt + rho dV as a real 2-vector (cos X, sin X).
        "circular" => ModelCatalogEntry {
            name: name.into(),
            diffusion: ScalarDiffusion::ornstein_uhlenbeck(1.0, sqrt2),
            observation: ObservationModel::continuous(
                2,
                |x, o| {
                    let (s, c) = x.sin_cos();
                    o[0] = c;
                    o[1] = s;
                },
                |x, o| {
                    let (s, c) = x.sin_cos();
                    o[0] = -s;
                    o[1] = c;
                },
                params.intensity,
                dt,
            )?,
            initial_law: params.initial_law,
            linear: None,
        },
        "brownian" => ModelCatalogEntry {
            name: name.into(),
            diffusion: ScalarDiffusion::brownian(params.brownian_sigma),
            observation: ObservationModel::discrete_scalar(
                |x| x,
                |_| 1.0,
                params.obs_variance,
                dt,
            )?,
            initial_law: params.initial_law,
            linear: Some(LinearGaussian {
                rate: 0.0,
                sigma: params.brownian_sigma,
                gain: 1.0,
                obs_variance: params.obs_variance,
            }),
        },
        other => {
            return Err(Error::invalid(format!(
                "unknown model '{other}' (known: {})",
                CATALOG_NAMES.join(", ")
            )))
        }
    };
    Ok(entry)
}
