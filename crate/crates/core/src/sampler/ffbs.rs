use crate::error::Result;
use crate::hmm::{forward, sample_categorical, stationary_distribution, HmmParams};
use crate::seed::Rng;

/// Forward filtering, backward sampling: an exact draw of `x_{1:n}` from
/// `p(x | y, θ)` under the stationary start `X_1 ~ μ_θ`.
pub fn ffbs_states(theta: &HmmParams, y: &[f64], rng: &mut Rng) -> Result<Vec<usize>> {
    let k = theta.k();
    let n = y.len();
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let mu = stationary_distribution(theta)?.mu;
    let fwd = forward(theta, y, &mu)?;
    let filt = &fwd.filtered;
    let mut path = vec![0; n];
    path[n - 1] = sample_categorical(&filt[(n - 1) * k..], rng);
    let mut w = vec![0.0; k];
    for t in (0..n - 1).rev() {
        let next = path[t + 1];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = filt[t * k + i] * theta.q(i, next);
        }
        path[t] = sample_categorical(&w, rng);
    }
    debug_assert!(path.iter().all(|&s| s < k));
    Ok(path)
}

/// `n_ij`: number of transitions `i → j` along `path`, row-major `k × k`.
pub fn transition_counts(path: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0.0; k * k];
    for w in path.windows(2) {
        counts[w[0] * k + w[1]] += 1.0;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::EmissionModel;
    use crate::seed::rng_from_seed;

    #[test]
    fn single_state_path_is_constant() {
        let t = HmmParams::single(EmissionModel::gaussian(1.0), 0.0).unwrap();
        let p = ffbs_states(&t, &[0.0, 1.0, 2.0], &mut rng_from_seed(0)).unwrap();
        assert_eq!(p, vec![0, 0, 0]);
    }

    #[test]
    fn identity_chain_path_is_constant() {
        let t = HmmParams::two_state(EmissionModel::gaussian(1.0), 0.0, 0.0, -1.0, 1.0).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let p = ffbs_states(&t, &[-1.0, 1.0, 0.3, 0.0, -2.0], &mut rng).unwrap();
            assert!(p.iter().all(|&s| s == p[0]));
        }
    }

    #[test]
    fn counts() {
        let c = transition_counts(&[0, 0, 1, 1, 1, 0], 2);
        assert_eq!(c, vec![1.0, 1.0, 1.0, 2.0]);
    }
}
