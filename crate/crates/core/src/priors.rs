//! Prior densities over [`HmmParams`].
//!
//! Rows of the transition matrix are a priori independent, and independent
//! of the emission parameters, which are i.i.d. from an emission prior `ω`.
//! Row densities are taken with respect to Lebesgue measure on the free
//! coordinates `(u_1, …, u_{k−1})` of the simplex.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{EmissionModel, HmmParams};
use crate::numeric::{ln_gamma, log_sum_exp};
use crate::seed::{rng_from_seed, split_seed, stream, Rng};

/// Prior on one transition row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RowPrior {
    /// Dirichlet(α_1, …, α_k).
    #[serde(rename = "dirichlet")]
    DirichletType { alphas: Vec<f64> },
    /// Density proportional to `Π_j exp(−C/u_j)`.
    #[serde(rename = "exponential")]
    ExponentialType { c: f64 },
}

impl RowPrior {
    pub fn dirichlet(alphas: Vec<f64>) -> Self {
        RowPrior::DirichletType { alphas }
    }

    pub fn symmetric_dirichlet(k: usize, alpha: f64) -> Self {
        RowPrior::DirichletType {
            alphas: vec![alpha; k],
        }
    }

    pub fn exponential(c: f64) -> Self {
        RowPrior::ExponentialType { c }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            RowPrior::DirichletType { alphas } => {
                if alphas.len() != k {
                    return Err(Error::invalid(format!("dirichlet prior has {} alphas for k = {k}", alphas.len())));
                }
                if alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                    return Err(Error::invalid(format!("dirichlet alphas must be positive: {alphas:?}")));
                }
            }
            RowPrior::ExponentialType { c } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid(format!("exponential-type constant must be positive, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// `ᾱ = Σ α_i` for Dirichlet priors.
    pub fn alpha_bar(&self) -> Option<f64> {
        match self {
            RowPrior::DirichletType { alphas } => Some(alphas.iter().sum()),
            RowPrior::ExponentialType { .. } => None,
        }
    }

    /// Log-density of `row`.
    ///
    /// Dirichlet boundary convention: a zero coordinate contributes `0` when
    /// `α_i = 1`, `−∞` when `α_i > 1` and `+∞` when `α_i < 1`. The
    /// exponential-type density is `−∞` on the boundary.
    pub fn log_density(&self, row: &[f64]) -> Result<f64> {
        if let Some(v) = row.iter().find(|&&v| v < 0.0 || v.is_nan()) {
            return Err(Error::precondition(format!("negative coordinate {v} in row {row:?}")));
        }
        let k = row.len();
        if k == 1 {
            return Ok(0.0);
        }
        match self {
            RowPrior::DirichletType { alphas } => {
                if alphas.len() != k {
                    return Err(Error::precondition("row length does not match the dirichlet prior"));
                }
                Ok(dirichlet_log_density(alphas, row))
            }
            RowPrior::ExponentialType { c } => {
                if row.iter().any(|&u| u <= 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(exponential_log_kernel(*c, row) - exponential_log_normalizer(k, *c))
            }
        }
    }

    pub fn sample(&self, k: usize, rng: &mut Rng) -> Result<Vec<f64>> {
        if k == 1 {
            return Ok(vec![1.0]);
        }
        match self {
            RowPrior::DirichletType { alphas } => Ok(dirichlet_sample(alphas, rng)),
            RowPrior::ExponentialType { c } => exponential_sample(k, *c, rng),
        }
    }
}

/// `log Γ(ᾱ) − Σ log Γ(α_i) + Σ (α_i − 1) log u_i`.
pub fn dirichlet_log_density(alphas: &[f64], u: &[f64]) -> f64 {
    let abar: f64 = alphas.iter().sum();
    let mut lp = ln_gamma(abar) - alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    for (&a, &x) in alphas.iter().zip(u) {
        if a == 1.0 {
            continue;
        }
        if x == 0.0 {
            return if a > 1.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        lp += (a - 1.0) * x.ln();
    }
    lp
}

/// Normalized Gamma draws. Retries in the rare event all draws underflow.
pub fn dirichlet_sample(alphas: &[f64], rng: &mut Rng) -> Vec<f64> {
    loop {
        let mut draws: Vec<f64> = alphas
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let s: f64 = draws.iter().sum();
        if s > 0.0 && s.is_finite() {
            draws.iter_mut().for_each(|v| *v /= s);
            return draws;
        }
    }
}

/// `−C Σ_j 1/u_j`.
fn exponential_log_kernel(c: f64, u: &[f64]) -> f64 {
    -c * u.iter().map(|&x| 1.0 / x).sum::<f64>()
}

/// Draws used for the Monte-Carlo normalizer of the exponential-type prior.
pub const EXPONENTIAL_NORMALIZER_DRAWS: usize = 1_000_000;

static NORMALIZERS: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();

/// `log ∫ Π_j exp(−C/u_j) du` over the simplex, estimated once per `(k, C)`
/// by importance sampling against the uniform law on the simplex.
pub fn exponential_log_normalizer(k: usize, c: f64) -> f64 {
    if k == 1 {
        return -c;
    }
    let cache = NORMALIZERS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    *guard
        .entry((k, c.to_bits()))
        .or_insert_with(|| compute_exponential_log_normalizer(k, c))
}

fn compute_exponential_log_normalizer(k: usize, c: f64) -> f64 {
    let mut rng = rng_from_seed(split_seed(stream::NORMALIZER, (k as u64) ^ c.to_bits()));
    let ones = vec![1.0; k];
    let logs: Vec<f64> = (0..EXPONENTIAL_NORMALIZER_DRAWS)
        .map(|_| exponential_log_kernel(c, &dirichlet_sample(&ones, &mut rng)))
        .collect();
    // uniform density on the simplex is (k−1)!
    let log_fact: f64 = (1..k).map(|i| (i as f64).ln()).sum();
    log_sum_exp(&logs) - (EXPONENTIAL_NORMALIZER_DRAWS as f64).ln() - log_fact
}

/// Attempts before the exponential-type rejection sampler gives up.
const MAX_REJECTION_ATTEMPTS: u64 = 1_000_000;

/// Rejection from uniform proposals; the kernel peaks at `u = 1/k` where it
/// equals `exp(−C k²)`.
fn exponential_sample(k: usize, c: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let ones = vec![1.0; k];
    let log_max = -c * (k * k) as f64;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let u = dirichlet_sample(&ones, rng);
        let log_acc = exponential_log_kernel(c, &u) - log_max;
        if rng.random::<f64>().ln() < log_acc {
            return Ok(u);
        }
    }
    Err(Error::SamplerStuck {
        rate: 1.0 / MAX_REJECTION_ATTEMPTS as f64,
        attempts: MAX_REJECTION_ATTEMPTS,
    })
}

/// Independent row priors, one per row of the transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPrior {
    rows: Vec<RowPrior>,
}

impl TransitionPrior {
    /// The same prior on each of the `k` rows.
    pub fn shared(k: usize, row: RowPrior) -> Self {
        TransitionPrior { rows: vec![row; k] }
    }

    pub fn per_row(rows: Vec<RowPrior>) -> Self {
        TransitionPrior { rows }
    }

    /// Independent Beta priors on `(p, q)` of a two-state chain,
    /// `π(p, q) ∝ p^{α−1}(1−p)^{β−1} q^{α−1}(1−q)^{β−1}`.
    ///
    /// Row 0 is `(1 − p, p)` and row 1 is `(q, 1 − q)`.
    pub fn two_state_beta(alpha: f64, beta: f64) -> Self {
        TransitionPrior {
            rows: vec![RowPrior::dirichlet(vec![beta, alpha]), RowPrior::dirichlet(vec![alpha, beta])],
        }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &RowPrior {
        &self.rows[i]
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.rows.len() != k {
            return Err(Error::invalid(format!("{} row priors for k = {k}", self.rows.len())));
        }
        self.rows.iter().try_for_each(|r| r.validate(k))
    }

    /// True when every row has a Dirichlet prior (conjugate updates apply).
    pub fn is_dirichlet(&self) -> bool {
        self.rows.iter().all(|r| matches!(r, RowPrior::DirichletType { .. }))
    }
}

/// Prior `ω` on each emission parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EmissionPrior {
    /// `γ ~ N(m0, s0²)` for Gaussian means.
    GaussianMean { m0: f64, s0: f64 },
    /// `λ ~ Gamma(a0, rate b0)` for Poisson rates.
    GammaRate { a0: f64, b0: f64 },
}

impl EmissionPrior {
    /// Default prior matching the emission family.
    pub fn default_for(model: EmissionModel) -> Self {
        match model {
            EmissionModel::GaussianKnownVariance { .. } => EmissionPrior::GaussianMean { m0: 0.0, s0: 5.0 },
            EmissionModel::Poisson => EmissionPrior::GammaRate { a0: 1.0, b0: 1.0 },
        }
    }

    pub fn validate(&self, model: EmissionModel) -> Result<()> {
        match (*self, model) {
            (EmissionPrior::GaussianMean { m0, s0 }, EmissionModel::GaussianKnownVariance { .. }) => {
                if !(s0 > 0.0 && s0.is_finite() && m0.is_finite()) {
                    return Err(Error::invalid(format!("gaussian-mean prior needs finite m0 and s0 > 0, got ({m0}, {s0})")));
                }
            }
            (EmissionPrior::GammaRate { a0, b0 }, EmissionModel::Poisson) => {
                if !(a0 > 0.0 && b0 > 0.0 && a0.is_finite() && b0.is_finite()) {
                    return Err(Error::invalid(format!("gamma prior needs a0, b0 > 0, got ({a0}, {b0})")));
                }
            }
            (p, m) => return Err(Error::invalid(format!("emission prior {p:?} does not match family {m:?}"))),
        }
        Ok(())
    }

    pub fn log_density(&self, gamma: f64) -> f64 {
        match *self {
            EmissionPrior::GaussianMean { m0, s0 } => {
                let z = (gamma - m0) / s0;
                -0.5 * z * z - s0.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            EmissionPrior::GammaRate { a0, b0 } => {
                if gamma <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                a0 * b0.ln() - ln_gamma(a0) + (a0 - 1.0) * gamma.ln() - b0 * gamma
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            EmissionPrior::GaussianMean { m0, s0 } => Normal::new(m0, s0).expect("valid normal").sample(rng),
            EmissionPrior::GammaRate { a0, b0 } => loop {
                let v = Gamma::new(a0, 1.0 / b0).expect("valid gamma").sample(rng);
                if v > 0.0 {
                    break v;
                }
            },
        }
    }
}

/// `log π_k(θ)`: row log-densities plus emission log-densities.
pub fn log_prior(theta: &HmmParams, rows: &TransitionPrior, em: &EmissionPrior) -> Result<f64> {
    if rows.k() != theta.k() {
        return Err(Error::precondition(format!("{} row priors for k = {}", rows.k(), theta.k())));
    }
    let mut lp = 0.0;
    for (i, row) in theta.rows().enumerate() {
        lp += rows.row(i).log_density(row)?;
    }
    lp += theta.gammas().iter().map(|&g| em.log_density(g)).sum::<f64>();
    Ok(lp)
}

/// Draws `θ` from the prior.
pub fn sample_prior(
    k: usize,
    rows: &TransitionPrior,
    em_prior: &EmissionPrior,
    emission: EmissionModel,
    seed: u64,
) -> Result<HmmParams> {
    sample_prior_with(k, rows, em_prior, emission, &mut rng_from_seed(seed))
}

pub fn sample_prior_with(
    k: usize,
    rows: &TransitionPrior,
    em_prior: &EmissionPrior,
    emission: EmissionModel,
    rng: &mut Rng,
) -> Result<HmmParams> {
    rows.validate(k)?;
    em_prior.validate(emission)?;
    let mut q = Vec::with_capacity(k * k);
    for i in 0..k {
        q.extend(rows.row(i).sample(k, rng)?);
    }
    let gammas = (0..k).map(|_| em_prior.sample(rng)).collect();
    HmmParams::from_flat(emission, k, q, gammas)
}
