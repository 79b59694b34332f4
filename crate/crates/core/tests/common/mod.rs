//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hmmob::hmm::{EmissionModel, HmmParams};
use hmmob::seed::{rng_from_seed, Rng};
use rand::Rng as _;

pub fn gauss() -> EmissionModel {
    EmissionModel::gaussian(1.0)
}

/// Uniform draw from the simplex via normalized exponentials.
pub fn uniform_simplex(k: usize, rng: &mut Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn random_theta(k: usize, spread: f64, rng: &mut Rng) -> HmmParams {
    let rows = (0..k).map(|_| uniform_simplex(k, rng)).collect();
    let gammas = (0..k).map(|_| spread * (2.0 * rng.random::<f64>() - 1.0)).collect();
    HmmParams::new(gauss(), rows, gammas).unwrap()
}

pub fn seeded(seed: u64) -> Rng {
    rng_from_seed(seed)
}

/// Stationary law by repeated squaring of `Q` (strictly positive `Q` only).
pub fn stationary_by_powers(theta: &HmmParams) -> Vec<f64> {
    let k = theta.k();
    let mut m: Vec<Vec<f64>> = theta.rows().map(|r| r.to_vec()).collect();
    for _ in 0..40 {
        let mut next = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                next[i][j] = (0..k).map(|l| m[i][l] * m[l][j]).sum();
            }
        }
        // renormalize so round-off cannot compound over the squarings
        for row in next.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        m = next;
    }
    m[0].clone()
}

pub fn normal_pdf(mean: f64, sigma: f64, y: f64) -> f64 {
    let z = (y - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Calls `f` on every path in `{0..k}^n`.
pub fn for_each_path(k: usize, n: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0; n];
    loop {
        f(&path);
        let mut t = n;
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            path[t] += 1;
            if path[t] < k {
                break;
            }
            path[t] = 0;
        }
    }
}

/// `P(x_{1:n}, y_{1:n})` for a path started from the law `start` of `X_1`.
pub fn joint_path_density(theta: &HmmParams, start: &[f64], y: &[f64], path: &[usize]) -> f64 {
    let mut p = start[path[0]];
    for t in 0..path.len() {
        if t > 0 {
            p *= theta.q(path[t - 1], path[t]);
        }
        p *= normal_pdf(theta.gamma(path[t]), 1.0, y[t]);
    }
    p
}

/// Likelihood by summing over every hidden path.
pub fn brute_force_likelihood(theta: &HmmParams, start: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for_each_path(theta.k(), y.len(), |path| total += joint_path_density(theta, start, y, path));
    total
}
