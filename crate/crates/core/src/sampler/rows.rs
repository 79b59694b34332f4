//! Transition-row updates given a hidden path.
//!
//! The augmented target for row `i` is
//! `π_i(u) · Π_j u_j^{n_ij} · μ_Q(x_1)`: the row prior, the transition
//! counts of the path and the stationary probability of the first state.
//! Under Dirichlet priors the first two factors are conjugate, and the
//! `μ_Q(x_1)` factor is handled by an independence Metropolis step using the
//! conjugate draw as proposal.

use rand::Rng as _;

use super::ffbs::transition_counts;
use crate::error::{Error, Result};
use crate::hmm::{stationary_distribution, HmmParams};
use crate::priors::{dirichlet_log_density, dirichlet_sample, RowPrior, TransitionPrior};
use crate::seed::Rng;

/// Draws every row from its conjugate posterior `Dirichlet(α_i + n_i·)`.
pub fn gibbs_rows(path: &[usize], prior: &TransitionPrior, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let k = prior.k();
    if path.iter().any(|&s| s >= k) {
        return Err(Error::precondition(format!("path has states outside 0..{k}")));
    }
    let counts = transition_counts(path, k);
    (0..k)
        .map(|i| {
            let alphas = dirichlet_alphas(prior.row(i))?;
            Ok(conjugate_draw(alphas, &counts[i * k..(i + 1) * k], rng))
        })
        .collect()
}

fn dirichlet_alphas(row: &RowPrior) -> Result<&[f64]> {
    match row {
        RowPrior::DirichletType { alphas } => Ok(alphas),
        RowPrior::ExponentialType { .. } => Err(Error::precondition("conjugate row update needs a dirichlet prior")),
    }
}

fn conjugate_draw(alphas: &[f64], counts: &[f64], rng: &mut Rng) -> Vec<f64> {
    let post: Vec<f64> = alphas.iter().zip(counts).map(|(a, n)| a + n).collect();
    dirichlet_sample(&post, rng)
}

fn log_mu_first(theta: &HmmParams, x1: usize) -> Result<f64> {
    Ok(stationary_distribution(theta)?.mu[x1].ln())
}

/// Row-by-row update under Dirichlet priors: conjugate proposal, accepted
/// with probability `min(1, μ'(x_1)/μ(x_1))`. Returns the number of accepted rows.
pub fn update_rows_dirichlet(theta: &mut HmmParams, path: &[usize], prior: &TransitionPrior, rng: &mut Rng) -> Result<usize> {
    if !prior.is_dirichlet() {
        return Err(Error::precondition("conjugate row update needs a dirichlet prior"));
    }
    update_rows(theta, path, prior, 1.0, rng)
}

/// Updates every row under its own prior: the corrected conjugate step for
/// Dirichlet rows and the random-walk step for exponential-type rows.
/// Returns the number of accepted rows.
pub fn update_rows(theta: &mut HmmParams, path: &[usize], prior: &TransitionPrior, rw_scale: f64, rng: &mut Rng) -> Result<usize> {
    let k = theta.k();
    if prior.k() != k {
        return Err(Error::precondition(format!("prior has {} rows, parameters have k = {k}", prior.k())));
    }
    if k == 1 {
        return Ok(1);
    }
    if path.is_empty() || path.iter().any(|&s| s >= k) {
        return Err(Error::precondition(format!("path must be nonempty with states in 0..{k}")));
    }
    let counts = transition_counts(path, k);
    let x1 = path[0];
    let mut accepted = 0;
    for i in 0..k {
        let ci = &counts[i * k..(i + 1) * k];
        let ok = match prior.row(i) {
            RowPrior::DirichletType { alphas } => dirichlet_row_step(theta, i, alphas, ci, x1, rng)?,
            RowPrior::ExponentialType { c } => exponential_row_update(theta, i, *c, ci, x1, rw_scale, rng)?,
        };
        accepted += usize::from(ok);
    }
    Ok(accepted)
}

fn dirichlet_row_step(theta: &mut HmmParams, i: usize, alphas: &[f64], counts: &[f64], x1: usize, rng: &mut Rng) -> Result<bool> {
    let current = log_mu_first(theta, x1)?;
    let proposal = conjugate_draw(alphas, counts, rng);
    let mut cand = theta.clone();
    cand.set_row(i, &proposal);
    let next = log_mu_first(&cand, x1)?;
    if rng.random::<f64>().ln() < next - current {
        *theta = cand;
        return Ok(true);
    }
    Ok(false)
}

fn exponential_row_update(theta: &mut HmmParams, i: usize, c: f64, counts: &[f64], x1: usize, rw_scale: f64, rng: &mut Rng) -> Result<bool> {
    let base = theta.clone();
    let extra = |u: &[f64]| -> Result<f64> {
        let mut t = base.clone();
        t.set_row(i, u);
        log_mu_first(&t, x1)
    };
    let (row, ok) = exponential_row_step(theta.row(i), counts, c, rw_scale, extra, rng)?;
    if ok {
        theta.set_row(i, &row);
    }
    Ok(ok)
}

/// Log Metropolis–Hastings ratio for moving one row from `current` to
/// `proposal` under the exponential-type prior with constant `c`, transition
/// counts `counts` and Dirichlet random-walk proposal `Dir(u/rw_scale)`.
///
/// The prior normalizer cancels and is omitted.
pub fn mh_row_log_ratio(current: &[f64], proposal: &[f64], counts: &[f64], c: f64, rw_scale: f64) -> f64 {
    if proposal.iter().any(|&u| !(u > 0.0)) {
        return f64::NEG_INFINITY;
    }
    let log_target = |u: &[f64]| -> f64 {
        u.iter()
            .zip(counts)
            .map(|(&uj, &nj)| -c / uj + if nj > 0.0 { nj * uj.ln() } else { 0.0 })
            .sum()
    };
    let conc = |u: &[f64]| -> Vec<f64> { u.iter().map(|&v| v / rw_scale).collect() };
    let forward = dirichlet_log_density(&conc(current), proposal);
    let backward = dirichlet_log_density(&conc(proposal), current);
    log_target(proposal) - log_target(current) + backward - forward
}

/// One Metropolis step for a single row targeting
/// `exp-type prior × Π u_j^{n_j} × exp(extra(u))`. Returns the new row and
/// whether the move was accepted.
pub fn exponential_row_step<F>(
    current: &[f64],
    counts: &[f64],
    c: f64,
    rw_scale: f64,
    extra: F,
    rng: &mut Rng,
) -> Result<(Vec<f64>, bool)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if current.iter().any(|&u| !(u > 0.0)) {
        return Err(Error::precondition(format!("row {current:?} is not interior")));
    }
    let conc: Vec<f64> = current.iter().map(|&v| v / rw_scale).collect();
    let proposal = dirichlet_sample(&conc, rng);
    let mut log_ratio = mh_row_log_ratio(current, &proposal, counts, c, rw_scale);
    if log_ratio.is_finite() {
        log_ratio += extra(&proposal)? - extra(current)?;
    }
    if rng.random::<f64>().ln() < log_ratio {
        Ok((proposal, true))
    } else {
        Ok((current.to_vec(), false))
    }
}

/// Metropolis-within-Gibbs sweep over the rows under the exponential-type
/// prior with constant `c`, including the `μ_Q(x_1)` factor. Updates `theta`
/// in place and returns per-row acceptance flags.
pub fn mh_rows_exponential(theta: &mut HmmParams, path: &[usize], c: f64, rw_scale: f64, rng: &mut Rng) -> Result<Vec<bool>> {
    let k = theta.k();
    if k == 1 {
        return Ok(vec![true]);
    }
    let counts = transition_counts(path, k);
    let x1 = path[0];
    (0..k)
        .map(|i| exponential_row_update(theta, i, c, &counts[i * k..(i + 1) * k], x1, rw_scale, rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn empty_counts_draw_from_prior() {
        let prior = TransitionPrior::shared(2, RowPrior::dirichlet(vec![2.0, 6.0]));
        let mut rng = rng_from_seed(9);
        let n = 40_000;
        let mut mean = 0.0;
        for _ in 0..n {
            mean += gibbs_rows(&[1], &prior, &mut rng).unwrap()[0][0];
        }
        mean /= n as f64;
        assert!((mean - 0.25).abs() < 0.005, "{mean}");
    }

    #[test]
    fn concentrated_counts_push_mass_to_one_column() {
        let prior = TransitionPrior::shared(2, RowPrior::dirichlet(vec![1.0, 1.0]));
        let mut path = vec![0; 5001];
        path[5000] = 0;
        let rows = gibbs_rows(&path, &prior, &mut rng_from_seed(1)).unwrap();
        assert!(rows[0][0] > 0.995);
    }

    #[test]
    fn mh_identity_proposal_has_unit_ratio() {
        let u = [0.2, 0.5, 0.3];
        let r = mh_row_log_ratio(&u, &u, &[3.0, 0.0, 7.0], 1.0, 0.1);
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn rejects_boundary_rows() {
        assert!(exponential_row_step(&[0.0, 1.0], &[0.0, 0.0], 1.0, 0.1, |_| Ok(0.0), &mut rng_from_seed(0)).is_err());
    }
}
