use serde::{Deserialize, Serialize};

use super::params::HmmParams;
use super::stationary::stationary_distribution;
use crate::error::{Error, Result};
use crate::numeric::exp_relative;

/// Law of the hidden chain at the start of the likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitSpec {
    /// `X_0 = x`; the chain makes one transition before the first emission.
    PointMass(usize),
    /// `X_0 ~ π₀`; one transition before the first emission.
    Distribution(Vec<f64>),
    /// `X_1 ~ μ_θ`, emitting immediately (the stationary likelihood).
    Stationary,
}

/// Law of `X_1` implied by `init`.
pub fn initial_law(theta: &HmmParams, init: &InitSpec) -> Result<Vec<f64>> {
    let k = theta.k();
    match init {
        InitSpec::Stationary => Ok(stationary_distribution(theta)?.mu),
        InitSpec::PointMass(x) => {
            if *x >= k {
                return Err(Error::precondition(format!("initial state {x} outside 0..{k}")));
            }
            Ok(theta.row(*x).to_vec())
        }
        InitSpec::Distribution(pi0) => {
            if pi0.len() != k || pi0.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::precondition("initial distribution must be a nonnegative vector of length k"));
            }
            let s: f64 = pi0.iter().sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(Error::precondition(format!("initial distribution sums to {s}")));
            }
            Ok(propagate(theta, pi0))
        }
    }
}

/// `πᵀQ`.
#[inline]
pub(crate) fn propagate(theta: &HmmParams, pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; theta.k()];
    propagate_into(theta, pi, &mut out);
    out
}

#[inline]
pub(crate) fn propagate_into(theta: &HmmParams, pi: &[f64], out: &mut [f64]) {
    let k = theta.k();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &pi_i) in pi.iter().enumerate() {
        if pi_i == 0.0 {
            continue;
        }
        for (o, &qij) in out.iter_mut().zip(theta.row(i)) {
            *o += pi_i * qij;
        }
    }
    debug_assert_eq!(out.len(), k);
}

/// Output of the normalized forward recursion.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Filtering distributions `P(X_t | Y_{1:t})`, row-major `n × k`.
    pub filtered: Vec<f64>,
    pub log_likelihood: f64,
}

/// Normalized forward recursion starting from the law `start` of `X_1`.
pub fn forward(theta: &HmmParams, y: &[f64], start: &[f64]) -> Result<ForwardPass> {
    let k = theta.k();
    let em = theta.emission();
    let mut filtered = vec![0.0; y.len() * k];
    let mut pred = start.to_vec();
    let mut logs = vec![0.0; k];
    let mut ll = 0.0;
    for (t, &yt) in y.iter().enumerate() {
        for (i, l) in logs.iter_mut().enumerate() {
            *l = em.log_density(theta.gamma(i), yt);
        }
        let m = exp_relative(&mut logs);
        let row = &mut filtered[t * k..(t + 1) * k];
        let mut c = 0.0;
        for i in 0..k {
            row[i] = pred[i] * logs[i];
            c += row[i];
        }
        if !(c > 0.0) || !m.is_finite() {
            return Err(Error::Underflow { index: t });
        }
        ll += m + c.ln();
        row.iter_mut().for_each(|v| *v /= c);
        propagate_into(theta, row, &mut pred);
    }
    Ok(ForwardPass {
        filtered,
        log_likelihood: ll,
    })
}

/// Log-likelihood `ℓ_n(θ, init)` of the observations.
pub fn log_likelihood(theta: &HmmParams, y: &[f64], init: &InitSpec) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::precondition("empty observation sequence"));
    }
    let start = initial_law(theta, init)?;
    Ok(forward(theta, y, &start)?.log_likelihood)
}

/// One-step predictions `p_t = P(X_t = 1 | Y_{1:t-1})` of a two-state chain
/// `θ = (p, q, γ1, γ2)`, starting at `p_1 = q/(p + q)`.
///
/// State "1" is the first state (index 0).
pub fn prediction_filter(theta: &HmmParams, y: &[f64]) -> Result<Vec<f64>> {
    let (p, q) = theta
        .two_state_pq()
        .ok_or_else(|| Error::precondition(format!("prediction filter needs k = 2, got {}", theta.k())))?;
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::precondition(format!("need p, q in (0, 1), got p = {p}, q = {q}")));
    }
    let em = theta.emission();
    let mut out = Vec::with_capacity(y.len());
    let mut pk = q / (p + q);
    for (t, &yt) in y.iter().enumerate() {
        out.push(pk);
        let l1 = em.log_density(theta.gamma(0), yt);
        let l2 = em.log_density(theta.gamma(1), yt);
        let mut g = [l1, l2];
        exp_relative(&mut g);
        let [g1, g2] = g;
        let den = pk * g1 + (1.0 - pk) * g2;
        if !(den > 0.0) {
            return Err(Error::Underflow { index: t });
        }
        pk = ((1.0 - p) * pk * g1 + q * (1.0 - pk) * g2) / den;
    }
    Ok(out)
}

/// Rebuilds `ℓ_n(θ)` from the prediction filter: `Σ_t log[p_t g1(Y_t) + (1 − p_t) g2(Y_t)]`.
pub fn log_likelihood_from_predictions(theta: &HmmParams, y: &[f64], preds: &[f64]) -> f64 {
    let em = theta.emission();
    y.iter()
        .zip(preds)
        .map(|(&yt, &pt)| {
            let l1 = em.log_density(theta.gamma(0), yt);
            let l2 = em.log_density(theta.gamma(1), yt);
            let m = l1.max(l2);
            m + (pt * (l1 - m).exp() + (1.0 - pt) * (l2 - m).exp()).ln()
        })
        .sum()
}

/// `2 (ρ/(ρ − 1))²` with the Doeblin coefficient `ρ = 1/(1 − s)`, i.e. `2/s²`.
pub fn init_robustness_bound(theta: &HmmParams) -> f64 {
    let s = super::stationary::mixing_profile(theta).s;
    2.0 / (s * s)
}

/// `2 (σ₊/σ₋)²` where `σ₋, σ₊` are the smallest and largest transition
/// probabilities: the same bound with the minorization-ratio coefficient
/// `ρ = (1 − σ₋/σ₊)⁻¹`.
pub fn init_robustness_bound_minorization(theta: &HmmParams) -> f64 {
    let lo = theta.min_entry();
    let hi = theta.transition().iter().copied().fold(0.0, f64::max);
    2.0 * (hi / lo).powi(2)
}
