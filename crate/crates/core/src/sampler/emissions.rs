use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::hmm::EmissionModel;
use crate::priors::EmissionPrior;
use crate::seed::Rng;

/// Conjugate posterior of one emission parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmissionPosterior {
    Normal { mean: f64, var: f64 },
    /// Shape and rate.
    Gamma { shape: f64, rate: f64 },
}

impl EmissionPosterior {
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            EmissionPosterior::Normal { mean, var } => Normal::new(mean, var.sqrt()).expect("valid normal").sample(rng),
            EmissionPosterior::Gamma { shape, rate } => loop {
                let v = Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng);
                if v > 0.0 {
                    break v;
                }
            },
        }
    }
}

/// Posterior of `γ` given the observations assigned to one state.
///
/// Gaussian means: precision `1/s0² + m/σ²`, mean
/// `(m0/s0² + Σy/σ²)/precision`. Poisson rates: `Gamma(a0 + Σy, b0 + m)`.
pub fn emission_posterior(model: EmissionModel, prior: &EmissionPrior, count: usize, sum: f64) -> Result<EmissionPosterior> {
    match (model, *prior) {
        (EmissionModel::GaussianKnownVariance { sigma }, EmissionPrior::GaussianMean { m0, s0 }) => {
            let prec = 1.0 / (s0 * s0) + count as f64 / (sigma * sigma);
            let mean = (m0 / (s0 * s0) + sum / (sigma * sigma)) / prec;
            Ok(EmissionPosterior::Normal { mean, var: 1.0 / prec })
        }
        (EmissionModel::Poisson, EmissionPrior::GammaRate { a0, b0 }) => Ok(EmissionPosterior::Gamma {
            shape: a0 + sum,
            rate: b0 + count as f64,
        }),
        (m, p) => Err(Error::precondition(format!("emission prior {p:?} is not conjugate to {m:?}"))),
    }
}

/// Draws every `γ_i` from its conjugate posterior given the path.
pub fn gibbs_emissions(
    path: &[usize],
    y: &[f64],
    k: usize,
    model: EmissionModel,
    prior: &EmissionPrior,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if path.len() != y.len() {
        return Err(Error::precondition("path and observations differ in length"));
    }
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k];
    for (&s, &v) in path.iter().zip(y) {
        counts[s] += 1;
        sums[s] += v;
    }
    (0..k)
        .map(|i| Ok(emission_posterior(model, prior, counts[i], sums[i])?.sample(rng)))
        .collect()
}
