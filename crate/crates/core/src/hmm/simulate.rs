use rand::Rng as _;

use super::params::{HmmParams, ObservationSequence};
use super::stationary::stationary_distribution;
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, Rng};

/// Draws an index from the probability vector `p`.
#[inline]
pub(crate) fn sample_categorical(p: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = p.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // round-off: last state with positive mass
    p.iter().rposition(|&w| w > 0.0).unwrap_or(p.len() - 1)
}

/// Simulates `n` steps of the stationary HMM: `X_1 ~ μ_θ`,
/// `X_{t+1} | X_t ~ Q(X_t, ·)`, `Y_t | X_t ~ g_{γ_{X_t}}`.
pub fn simulate(theta: &HmmParams, n: usize, seed: u64) -> Result<ObservationSequence> {
    if n == 0 {
        return Err(Error::precondition("n must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let (x, y) = simulate_with(theta, n, &mut rng)?;
    Ok(ObservationSequence {
        y,
        x_true: Some(x),
        seed,
        theta_true: Some(theta.clone()),
    })
}

/// Simulation driven by a caller-owned RNG; returns `(x, y)`.
pub fn simulate_with(theta: &HmmParams, n: usize, rng: &mut Rng) -> Result<(Vec<usize>, Vec<f64>)> {
    let mu = stationary_distribution(theta)?.mu;
    let em = theta.emission();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut state = sample_categorical(&mu, rng);
    for t in 0..n {
        if t > 0 {
            state = sample_categorical(theta.row(state), rng);
        }
        x.push(state);
        y.push(em.sample(theta.gamma(state), rng));
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::EmissionModel;

    #[test]
    fn single_state_path() {
        let t = HmmParams::single(EmissionModel::gaussian(1.0), 3.0).unwrap();
        let s = simulate(&t, 50, 1).unwrap();
        assert!(s.x_true.unwrap().iter().all(|&x| x == 0));
    }

    #[test]
    fn identity_chain_is_constant() {
        let t = HmmParams::two_state(EmissionModel::gaussian(1.0), 0.0, 0.0, 0.0, 5.0).unwrap();
        for seed in 0..20 {
            let x = simulate(&t, 100, seed).unwrap().x_true.unwrap();
            assert!(x.iter().all(|&s| s == x[0]));
        }
    }

    #[test]
    fn balanced_chain_occupancy() {
        let t = HmmParams::two_state(EmissionModel::gaussian(1.0), 0.5, 0.5, 0.0, 1.0).unwrap();
        let x = simulate(&t, 100_000, 11).unwrap().x_true.unwrap();
        let frac = x.iter().filter(|&&s| s == 0).count() as f64 / x.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn deterministic_given_seed() {
        let t = HmmParams::two_state(EmissionModel::Poisson, 0.2, 0.3, 1.0, 6.0).unwrap();
        assert_eq!(simulate(&t, 200, 5).unwrap(), simulate(&t, 200, 5).unwrap());
        assert_ne!(simulate(&t, 200, 5).unwrap().y, simulate(&t, 200, 6).unwrap().y);
    }
}
