use super::params::HmmParams;
use super::stationary::stationary_distribution;
use crate::error::{Error, Result};

/// Central finite-difference Jacobian of `μ_θ` with respect to the free
/// transition coordinates `q_ij`, `j < k − 1`.
///
/// Returns a `k × k(k−1)` matrix as rows indexed by the state `m`; column
/// `i(k−1) + j` holds `∂μ(m)/∂q_ij`. Each perturbation of `q_ij` is
/// compensated on the last entry `q_{i,k−1}` of the same row so rows stay on
/// the simplex.
pub fn stationary_jacobian_fd(theta: &HmmParams, h: f64) -> Result<Vec<Vec<f64>>> {
    let k = theta.k();
    if k < 2 {
        return Err(Error::precondition("jacobian needs k >= 2"));
    }
    if !(h > 0.0) || theta.min_entry() <= h {
        return Err(Error::precondition(format!(
            "step h = {h} must be positive and below every q_ij (min {})",
            theta.min_entry()
        )));
    }
    let cols = k * (k - 1);
    let mut jac = vec![vec![0.0; cols]; k];
    for i in 0..k {
        for j in 0..k - 1 {
            let plus = stationary_distribution(&shifted(theta, i, j, h))?.mu;
            let minus = stationary_distribution(&shifted(theta, i, j, -h))?.mu;
            for m in 0..k {
                jac[m][i * (k - 1) + j] = (plus[m] - minus[m]) / (2.0 * h);
            }
        }
    }
    Ok(jac)
}

fn shifted(theta: &HmmParams, i: usize, j: usize, h: f64) -> HmmParams {
    let k = theta.k();
    let mut row = theta.row(i).to_vec();
    row[j] += h;
    row[k - 1] -= h;
    let mut t = theta.clone();
    t.set_row(i, &row);
    t
}
