use serde::{Deserialize, Serialize};

use super::emissions::gibbs_emissions;
use super::ffbs::ffbs_states;
use super::rows::update_rows;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmm::{log_likelihood, EmissionModel, HmmParams, InitSpec};
use crate::priors::{log_prior, sample_prior_with, EmissionPrior, RowPrior, TransitionPrior};
use crate::seed::{split_seed, stream, stream_rng, Rng};

/// Target row acceptance band for the exponential-type random walk.
pub const ROW_ACCEPT_BAND: (f64, f64) = (0.2, 0.5);

/// Everything the posterior depends on besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorModel {
    pub k: usize,
    pub emission: EmissionModel,
    pub rows: TransitionPrior,
    pub em_prior: EmissionPrior,
}

impl PosteriorModel {
    pub fn new(k: usize, emission: EmissionModel, row_prior: RowPrior, em_prior: EmissionPrior) -> Self {
        PosteriorModel {
            k,
            emission,
            rows: TransitionPrior::shared(k, row_prior),
            em_prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.emission.validate()?;
        self.rows.validate(self.k)?;
        self.em_prior.validate(self.emission)
    }

    /// `ℓ_n(θ, stationary) + log π(θ)`.
    pub fn log_posterior(&self, theta: &HmmParams, y: &[f64]) -> Result<f64> {
        Ok(log_likelihood(theta, y, &InitSpec::Stationary)? + log_prior(theta, &self.rows, &self.em_prior)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInit {
    FromPrior,
    UserSupplied(HmmParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Dirichlet random-walk proposals have concentration `1/rw_scale`.
    pub rw_scale: f64,
    pub init: ChainInit,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 6000,
            burn_in: 1000,
            thin: 1,
            rw_scale: 0.1,
            init: ChainInit::FromPrior,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::invalid(format!(
                "need 0 <= burn_in < n_iter, got burn_in = {}, n_iter = {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if !(self.rw_scale > 0.0 && self.rw_scale.is_finite()) {
            return Err(Error::invalid(format!("rw_scale must be positive, got {}", self.rw_scale)));
        }
        Ok(())
    }

    /// Number of samples a chain with this config stores.
    pub fn n_samples(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }

    fn keeps(&self, iter: usize) -> bool {
        iter > self.burn_in && (iter - self.burn_in - 1) % self.thin == 0
    }
}

/// Acceptance fractions of the row and emission blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptRates {
    pub rows: f64,
    pub emissions: f64,
}

/// Thinned post-burn-in draws of one chain. Samples are stored as drawn,
/// without relabeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTrace {
    pub samples: Vec<HmmParams>,
    pub log_post: Vec<f64>,
    /// 1-based sweep index of each sample.
    pub iterations: Vec<usize>,
    /// Acceptance fractions within the sweep that produced each sample.
    pub sweep_accept: Vec<AcceptRates>,
    /// Acceptance fractions over all sweeps, burn-in included.
    pub accept_rates: AcceptRates,
    pub config: SamplerConfig,
    pub warnings: Vec<String>,
}

impl PosteriorTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.samples.len();
        if n == 0 {
            return Err(Error::invalid("trace has no samples"));
        }
        if self.log_post.len() != n || self.iterations.len() != n || self.sweep_accept.len() != n {
            return Err(Error::invalid("trace columns differ in length"));
        }
        self.samples.iter().try_for_each(HmmParams::validate)
    }

    /// Relabels the states of every sample.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let samples = self.samples.iter().map(|s| s.permute(perm)).collect::<Result<_>>()?;
        Ok(PosteriorTrace {
            samples,
            ..self.clone()
        })
    }
}

/// One systematic-scan sweep: hidden path, then rows, then emissions.
/// Returns the sampled path and the sweep's acceptance fractions.
pub fn sweep(theta: &mut HmmParams, y: &[f64], model: &PosteriorModel, rw_scale: f64, rng: &mut Rng) -> Result<(Vec<usize>, AcceptRates)> {
    let k = theta.k();
    let path = ffbs_states(theta, y, rng)?;
    let accepted = update_rows(theta, &path, &model.rows, rw_scale, rng)?;
    let gammas = gibbs_emissions(&path, y, k, model.emission, &model.em_prior, rng)?;
    theta.set_gammas(gammas);
    Ok((
        path,
        AcceptRates {
            rows: accepted as f64 / k as f64,
            emissions: 1.0,
        },
    ))
}

/// Runs one chain targeting the posterior of `model` given `y`.
pub fn run_chain(y: &[f64], model: &PosteriorModel, cfg: &SamplerConfig) -> Result<PosteriorTrace> {
    model.validate()?;
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::precondition("empty observation sequence"));
    }
    for &v in y {
        model.emission.check_observation(v)?;
    }
    let mut theta = match &cfg.init {
        ChainInit::FromPrior => sample_prior_with(
            model.k,
            &model.rows,
            &model.em_prior,
            model.emission,
            &mut stream_rng(cfg.seed, stream::INIT),
        )?,
        ChainInit::UserSupplied(t) => {
            if t.k() != model.k || t.emission() != model.emission {
                return Err(Error::invalid("initial parameters do not match the model"));
            }
            t.clone()
        }
    };
    let mut rng = stream_rng(cfg.seed, stream::CHAIN);
    let cap = cfg.n_samples();
    let mut trace = PosteriorTrace {
        samples: Vec::with_capacity(cap),
        log_post: Vec::with_capacity(cap),
        iterations: Vec::with_capacity(cap),
        sweep_accept: Vec::with_capacity(cap),
        accept_rates: AcceptRates::default(),
        config: cfg.clone(),
        warnings: Vec::new(),
    };
    let mut totals = AcceptRates::default();
    for iter in 1..=cfg.n_iter {
        let wrap = |e: Error| Error::Chain {
            iteration: iter,
            source: Box::new(e),
        };
        let (_, acc) = sweep(&mut theta, y, model, cfg.rw_scale, &mut rng).map_err(wrap)?;
        totals.rows += acc.rows;
        totals.emissions += acc.emissions;
        if cfg.keeps(iter) {
            let lp = model.log_posterior(&theta, y).map_err(wrap)?;
            trace.samples.push(theta.clone());
            trace.log_post.push(lp);
            trace.iterations.push(iter);
            trace.sweep_accept.push(acc);
        }
    }
    trace.accept_rates = AcceptRates {
        rows: totals.rows / cfg.n_iter as f64,
        emissions: totals.emissions / cfg.n_iter as f64,
    };
    let uses_rw = (0..model.k).any(|i| matches!(model.rows.row(i), RowPrior::ExponentialType { .. }));
    let r = trace.accept_rates.rows;
    if uses_rw && model.k > 1 && !(ROW_ACCEPT_BAND.0..=ROW_ACCEPT_BAND.1).contains(&r) {
        trace.warnings.push(format!(
            "row acceptance {r:.3} outside [{}, {}]; consider adjusting rw_scale = {}",
            ROW_ACCEPT_BAND.0, ROW_ACCEPT_BAND.1, cfg.rw_scale
        ));
    }
    Ok(trace)
}

/// Seed of chain `index` under base seed `seed`.
pub fn chain_seed(seed: u64, index: u64) -> u64 {
    split_seed(seed, index)
}

/// Runs `n_chains` independent chains on the same data with split seeds.
pub fn run_chains(y: &[f64], model: &PosteriorModel, cfg: &SamplerConfig, n_chains: usize, exec: Exec) -> Result<Vec<PosteriorTrace>> {
    exec.map(n_chains, |c| {
        let cfg = SamplerConfig {
            seed: chain_seed(cfg.seed, c as u64),
            ..cfg.clone()
        };
        run_chain(y, model, &cfg)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: usize) -> PosteriorModel {
        PosteriorModel::new(
            k,
            EmissionModel::gaussian(1.0),
            RowPrior::symmetric_dirichlet(k, 2.0),
            EmissionPrior::GaussianMean { m0: 0.0, s0: 5.0 },
        )
    }

    #[test]
    fn one_post_burn_in_sample() {
        let cfg = SamplerConfig {
            n_iter: 11,
            burn_in: 10,
            thin: 1,
            ..SamplerConfig::default()
        };
        let tr = run_chain(&[0.1, -0.4, 1.0], &model(2), &cfg).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.iterations, vec![11]);
        tr.validate().unwrap();
    }

    #[test]
    fn thinning_count() {
        let cfg = SamplerConfig {
            n_iter: 25,
            burn_in: 5,
            thin: 3,
            ..SamplerConfig::default()
        };
        assert_eq!(cfg.n_samples(), 7);
        let tr = run_chain(&[0.1, -0.4, 1.0], &model(2), &cfg).unwrap();
        assert_eq!(tr.len(), 7);
        assert_eq!(tr.iterations[0], 6);
        assert_eq!(tr.iterations[6], 24);
    }

    #[test]
    fn config_validation() {
        let bad = SamplerConfig {
            n_iter: 10,
            burn_in: 10,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            thin: 0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn replay_is_bit_identical() {
        let cfg = SamplerConfig {
            n_iter: 60,
            burn_in: 10,
            thin: 2,
            seed: 77,
            ..SamplerConfig::default()
        };
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 3.0 - 1.5).collect();
        let a = run_chain(&y, &model(3), &cfg).unwrap();
        let b = run_chain(&y, &model(3), &cfg).unwrap();
        assert_eq!(a, b);
        let seq = run_chains(&y, &model(2), &cfg, 3, Exec::Sequential).unwrap();
        let par = run_chains(&y, &model(2), &cfg, 3, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_ne!(seq[0].samples, seq[1].samples);
    }
}
