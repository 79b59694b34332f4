use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ln_gamma;
use crate::seed::Rng;

/// Parametric family of the emission densities `g_γ`.
///
/// Both shipped families have a scalar parameter (`d = 1`): the mean of a
/// Gaussian with known standard deviation, or a Poisson rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EmissionModel {
    #[serde(rename = "gaussian")]
    GaussianKnownVariance { sigma: f64 },
    Poisson,
}

impl EmissionModel {
    pub fn gaussian(sigma: f64) -> Self {
        EmissionModel::GaussianKnownVariance { sigma }
    }

    /// Dimension `d` of the emission parameter.
    pub fn dim(&self) -> usize {
        1
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EmissionModel::GaussianKnownVariance { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether `gamma` lies in the parameter space Γ.
    pub fn admits(&self, gamma: f64) -> bool {
        match self {
            EmissionModel::GaussianKnownVariance { .. } => gamma.is_finite(),
            EmissionModel::Poisson => gamma > 0.0 && gamma.is_finite(),
        }
    }

    /// `log g_γ(y)`; `-inf` outside the support.
    #[inline]
    pub fn log_density(&self, gamma: f64, y: f64) -> f64 {
        match *self {
            EmissionModel::GaussianKnownVariance { sigma } => {
                let z = (y - gamma) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            EmissionModel::Poisson => {
                if y < 0.0 || y.fract() != 0.0 {
                    return f64::NEG_INFINITY;
                }
                if y == 0.0 {
                    return -gamma;
                }
                y * gamma.ln() - gamma - ln_gamma(y + 1.0)
            }
        }
    }

    pub fn density(&self, gamma: f64, y: f64) -> f64 {
        self.log_density(gamma, y).exp()
    }

    pub fn sample(&self, gamma: f64, rng: &mut Rng) -> f64 {
        match *self {
            EmissionModel::GaussianKnownVariance { sigma } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                gamma + sigma * z
            }
            EmissionModel::Poisson => Poisson::new(gamma)
                .expect("admissible poisson rate")
                .sample(rng),
        }
    }

    /// Checks that an observation is in the support of the family.
    pub fn check_observation(&self, y: f64) -> Result<()> {
        let ok = match self {
            EmissionModel::GaussianKnownVariance { .. } => y.is_finite(),
            EmissionModel::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("observation {y} outside the support of {self:?}")))
        }
    }
}
