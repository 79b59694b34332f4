use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::HmmParams;
use crate::error::{Error, Result};

/// Relative singular-value threshold below which the stationary system is
/// treated as rank deficient (reducible chain).
const RANK_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 1_000_000;

/// A stationary law `μ` of the hidden chain, `μᵀQ = μᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    pub mu: Vec<f64>,
    /// False when `Q` admits several stationary laws and `mu` is the one
    /// reached by the lazy power iteration from the uniform vector.
    pub unique: bool,
}

/// Solves `[Qᵀ − I; 1ᵀ] μ = [0; 1]` in the least-squares sense.
///
/// Reducible chains (rank-deficient system) fall back to power iteration of
/// the lazy chain `(I + Q)/2` started from the uniform vector. For `Q = I`
/// this returns the uniform law.
pub fn stationary_distribution(theta: &HmmParams) -> Result<StationaryDist> {
    let k = theta.k();
    if k == 1 {
        return Ok(StationaryDist {
            mu: vec![1.0],
            unique: true,
        });
    }
    let a = DMatrix::from_fn(k + 1, k, |r, c| {
        if r == k {
            1.0
        } else {
            theta.q(c, r) - if r == c { 1.0 } else { 0.0 }
        }
    });
    let mut b = DVector::zeros(k + 1);
    b[k] = 1.0;

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin > RANK_TOL * smax {
        if let Ok(x) = svd.solve(&b, 0.0) {
            let mu = clean(x.iter().copied().collect());
            if residual(theta, &mu) <= RESIDUAL_TOL {
                return Ok(StationaryDist { mu, unique: true });
            }
        }
    }
    power_iteration(theta).map(|mu| StationaryDist { mu, unique: false })
}

fn clean(mut mu: Vec<f64>) -> Vec<f64> {
    for v in mu.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|v| *v /= s);
    mu
}

/// `max_j |(μᵀQ)_j − μ_j|`.
pub fn residual(theta: &HmmParams, mu: &[f64]) -> f64 {
    let k = theta.k();
    (0..k)
        .map(|j| {
            let s: f64 = (0..k).map(|i| mu[i] * theta.q(i, j)).sum();
            (s - mu[j]).abs()
        })
        .fold(0.0, f64::max)
}

fn power_iteration(theta: &HmmParams) -> Result<Vec<f64>> {
    let k = theta.k();
    let mut mu = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    for _ in 0..POWER_MAX_ITER {
        for (j, nj) in next.iter_mut().enumerate() {
            let s: f64 = (0..k).map(|i| mu[i] * theta.q(i, j)).sum();
            *nj = 0.5 * (mu[j] + s);
        }
        let diff: f64 = mu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut mu, &mut next);
        if diff < 1e-15 {
            break;
        }
    }
    let mu = clean(mu);
    let r = residual(theta, &mu);
    if r > RESIDUAL_TOL {
        let rows: Vec<Vec<f64>> = theta.rows().map(<[f64]>::to_vec).collect();
        return Err(Error::numerical(
            format!("stationary distribution of Q = {rows:?}"),
            format!("power iteration residual {r:e}"),
        ));
    }
    Ok(mu)
}

/// Geometric-ergodicity summary of the hidden chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    /// Doeblin mass `Σ_j min_i q_ij`.
    pub s: f64,
    /// `ρ = 1/(1 − s)`, infinite when `s = 1`.
    pub rho: f64,
    /// `(ρ − 1)/(2 + ρ − 1) = s/(2 − s)`.
    pub tau: f64,
}

pub fn mixing_profile(theta: &HmmParams) -> MixingProfile {
    let k = theta.k();
    let s: f64 = (0..k)
        .map(|j| (0..k).map(|i| theta.q(i, j)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        .clamp(0.0, 1.0);
    let rho = if s >= 1.0 { f64::INFINITY } else { 1.0 / (1.0 - s) };
    MixingProfile {
        s,
        rho,
        tau: s / (2.0 - s),
    }
}

/// `ρ − 1 = (p + q) ∧ (2 − (p + q))`, the alternative coefficient available
/// for two-state chains.
pub fn two_state_mixing(theta: &HmmParams) -> Result<f64> {
    let (p, q) = theta
        .two_state_pq()
        .ok_or_else(|| Error::precondition(format!("two_state_mixing needs k = 2, got {}", theta.k())))?;
    Ok((p + q).min(2.0 - (p + q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::EmissionModel;

    fn em() -> EmissionModel {
        EmissionModel::gaussian(1.0)
    }

    #[test]
    fn single_state() {
        let t = HmmParams::single(em(), 0.0).unwrap();
        assert_eq!(stationary_distribution(&t).unwrap().mu, vec![1.0]);
    }

    #[test]
    fn two_state_closed_form() {
        let t = HmmParams::two_state(em(), 0.3, 0.4, 0.0, 1.0).unwrap();
        let mu = stationary_distribution(&t).unwrap();
        assert!(mu.unique);
        assert!((mu.mu[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((mu.mu[1] - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn identity_falls_back_to_uniform() {
        let t = HmmParams::two_state(em(), 0.0, 0.0, 0.0, 1.0).unwrap();
        let mu = stationary_distribution(&t).unwrap();
        assert!(!mu.unique);
        assert_eq!(mu.mu, vec![0.5, 0.5]);
    }

    #[test]
    fn reducible_with_transient_state() {
        // state 2 absorbs, states 0 and 1 form a closed class
        let t = HmmParams::new(
            em(),
            vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]],
            vec![0.0, 1.0, 2.0],
        )
        .unwrap();
        let mu = stationary_distribution(&t).unwrap();
        assert!(!mu.unique);
        assert!(residual(&t, &mu.mu) < 1e-12);
    }

    #[test]
    fn periodic_chain_has_uniform_law() {
        let t = HmmParams::two_state(em(), 1.0, 1.0, 0.0, 1.0).unwrap();
        let mu = stationary_distribution(&t).unwrap();
        assert!((mu.mu[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mixing_profile_examples() {
        let id = HmmParams::two_state(em(), 0.0, 0.0, 0.0, 1.0).unwrap();
        let m = mixing_profile(&id);
        assert_eq!((m.s, m.rho, m.tau), (0.0, 1.0, 0.0));

        let eq = HmmParams::two_state(em(), 0.3, 0.7, 0.0, 1.0).unwrap();
        let m = mixing_profile(&eq);
        assert_eq!(m.s, 1.0);
        assert!(m.rho.is_infinite());
        assert_eq!(m.tau, 1.0);

        let t = HmmParams::two_state(em(), 0.3, 0.4, 0.0, 1.0).unwrap();
        let m = mixing_profile(&t);
        assert!((m.s - 0.7).abs() < 1e-15);
        assert!((m.rho - 10.0 / 3.0).abs() < 1e-12);
        assert!((m.tau - 7.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn two_state_alternative_coefficient() {
        let t = HmmParams::two_state(em(), 0.35, 0.35, 0.0, 1.0).unwrap();
        assert!((two_state_mixing(&t).unwrap() - 0.7).abs() < 1e-15);
        let general = mixing_profile(&t);
        assert!((general.rho - 1.0 - 0.7 / 0.3).abs() < 1e-12);
        let t3 = HmmParams::two_state(em(), 0.9, 0.8, 0.0, 1.0).unwrap();
        assert!((two_state_mixing(&t3).unwrap() - 0.3).abs() < 1e-12);
        assert!(two_state_mixing(&t.duplicate_last_state(3).unwrap()).is_err());
    }
}
