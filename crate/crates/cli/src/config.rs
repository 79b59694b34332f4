//! Experiment configuration.
//!
//! A config is one JSON document. Omitted fields take defaults, and the
//! materialized form (every field present) is what gets hashed and echoed
//! into the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use hmmob::hmm::HmmParams;
use hmmob::order::ScheduleOptions;
use hmmob::priors::{EmissionPrior, RowPrior, TransitionPrior};
use hmmob::sampler::{ChainInit, PosteriorModel, SamplerConfig};
use hmmob::seed::{split_seed, stream};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// More fitted states than true states.
    OverfitMerge,
    /// Fitted and true orders agree.
    CorrectOrder,
    /// One true state, two fitted states, Beta priors on `(p, q)`.
    TwoStateEmpty,
    Custom,
}

/// Transition prior as written in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowPriorSpec {
    /// The same prior on every row.
    Shared { row: RowPrior },
    PerRow { rows: Vec<RowPrior> },
    /// Independent `Beta(alpha, beta)` on the two switching probabilities.
    TwoStateBeta { alpha: f64, beta: f64 },
}

impl RowPriorSpec {
    pub fn transition_prior(&self, k: usize) -> TransitionPrior {
        match self {
            RowPriorSpec::Shared { row } => TransitionPrior::shared(k, row.clone()),
            RowPriorSpec::PerRow { rows } => TransitionPrior::per_row(rows.clone()),
            RowPriorSpec::TwoStateBeta { alpha, beta } => TransitionPrior::two_state_beta(*alpha, *beta),
        }
    }
}

/// Sampler settings; chain seeds are derived from the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub rw_scale: f64,
    pub init: ChainInit,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSettings {
            n_iter: d.n_iter,
            burn_in: d.burn_in,
            thin: d.thin,
            rw_scale: d.rw_scale,
            init: d.init,
        }
    }
}

impl SamplerSettings {
    pub fn with_seed(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            rw_scale: self.rw_scale,
            init: self.init.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceOptions {
    /// Monte-Carlo draws per distance evaluation.
    pub n_mc: usize,
    /// Evenly spaced samples evaluated per trace.
    pub max_evals: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions { n_mc: 4000, max_evals: 500 }
    }
}

/// Radius of the emptying set in the two-state report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsRule {
    /// `ε_n = n^{−exponent}`.
    Power { exponent: f64 },
    Fixed { value: f64 },
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::Power { exponent: 0.25 }
    }
}

impl EpsRule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            EpsRule::Power { exponent } => (n as f64).powf(-exponent),
            EpsRule::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub theta_true: HmmParams,
    pub fit_k: usize,
    pub row_prior: RowPriorSpec,
    /// Defaults to the family's standard prior.
    #[serde(default)]
    pub em_prior: Option<EmissionPrior>,
    pub n_grid: Vec<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default = "two")]
    pub marginal_l: usize,
    #[serde(default)]
    pub distance: DistanceOptions,
    #[serde(default)]
    pub schedule: ScheduleOptions,
    #[serde(default)]
    pub eps_n: EpsRule,
    /// Largest `|γ_1 − γ_2|` counted as merged in the two-state report.
    #[serde(default = "merge_tol")]
    pub merge_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "out_dir")]
    pub output_dir: PathBuf,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn merge_tol() -> f64 {
    0.3
}

fn out_dir() -> PathBuf {
    PathBuf::from("hmmob-out")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(CliError::config)?;
        cfg.materialize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    /// Fills in defaults that depend on other fields.
    pub fn materialize(&mut self) {
        if self.em_prior.is_none() {
            self.em_prior = Some(EmissionPrior::default_for(self.theta_true.emission()));
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let k0 = self.theta_true.k();
        if self.fit_k == 0 {
            return Err(CliError::config("fit_k must be at least 1"));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config(format!("n_grid must be nonempty, positive and increasing, got {:?}", self.n_grid)));
        }
        if self.replicates == 0 {
            return Err(CliError::config("replicates must be at least 1"));
        }
        match self.scenario {
            Scenario::OverfitMerge if self.fit_k <= k0 => {
                return Err(CliError::config(format!("overfit_merge needs fit_k > {k0}, got {}", self.fit_k)))
            }
            Scenario::CorrectOrder if self.fit_k != k0 => {
                return Err(CliError::config(format!("correct_order needs fit_k = {k0}, got {}", self.fit_k)))
            }
            Scenario::TwoStateEmpty if k0 != 1 || self.fit_k != 2 => {
                return Err(CliError::config(format!(
                    "two_state_empty needs one true state and fit_k = 2, got {k0} and {}",
                    self.fit_k
                )))
            }
            _ => {}
        }
        hmmob::marginals::MarginalSpec::new(self.marginal_l)?;
        self.sampler.with_seed(0).validate()?;
        self.schedule.validate()?;
        self.model().validate()?;
        if self.distance.n_mc < hmmob::marginals::MIN_N_MC || self.distance.max_evals == 0 {
            return Err(CliError::config(format!(
                "distance needs n_mc >= {} and max_evals >= 1",
                hmmob::marginals::MIN_N_MC
            )));
        }
        if !(self.merge_tol >= 0.0) {
            return Err(CliError::config("merge_tol must be nonnegative"));
        }
        Ok(())
    }

    pub fn k0(&self) -> usize {
        self.theta_true.k()
    }

    pub fn em_prior(&self) -> EmissionPrior {
        self.em_prior.unwrap_or_else(|| EmissionPrior::default_for(self.theta_true.emission()))
    }

    pub fn transition_prior(&self) -> TransitionPrior {
        self.row_prior.transition_prior(self.fit_k)
    }

    pub fn model(&self) -> PosteriorModel {
        PosteriorModel {
            k: self.fit_k,
            emission: self.theta_true.emission(),
            rows: self.transition_prior(),
            em_prior: self.em_prior(),
        }
    }

    /// Compact JSON of the materialized config with `output_dir` blanked,
    /// so that moving an experiment does not change its identity.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    /// Hex SHA-256 of [`ExperimentConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// All `(n, replicate)` tasks in grid order.
    pub fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::with_capacity(self.n_grid.len() * self.replicates);
        for (g, &n) in self.n_grid.iter().enumerate() {
            for r in 0..self.replicates {
                out.push(Task {
                    index: (g * self.replicates + r) as u64,
                    n,
                    replicate: r,
                });
            }
        }
        out
    }

    pub fn data_seed(&self, task: &Task) -> u64 {
        split_seed(split_seed(self.seed, stream::DATA), task.index)
    }

    pub fn chain_seed(&self, task: &Task) -> u64 {
        split_seed(split_seed(self.seed, stream::CHAIN), task.index)
    }

    pub fn distance_seed(&self, task: &Task) -> u64 {
        split_seed(split_seed(self.seed, stream::DISTANCE), task.index)
    }
}

/// One `(n, replicate)` cell of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub index: u64,
    pub n: usize,
    pub replicate: usize,
}

impl Task {
    pub fn stem(&self) -> String {
        format!("n{}_r{}", self.n, self.replicate)
    }
}
