//! Finite-dimensional marginals `f_{l,θ}` of the stationary observation
//! process and distances between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmm::{all_permutations, forward, mixing_profile, sample_categorical, stationary_distribution, EmissionModel, HmmParams};
use crate::numeric::adaptive_simpson;
use crate::seed::{split_seed, stream, stream_rng, Rng};

/// Largest supported marginal dimension: the marginal is a mixture of `k^l`
/// product components.
pub const MAX_L: usize = 4;
/// Number of Monte-Carlo shards. Fixed so results do not depend on the
/// thread count.
pub const DISTANCE_SHARDS: usize = 16;
pub const MIN_N_MC: usize = 100;

/// Dimension `l` of the marginal `(Y_1, …, Y_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub l: usize,
}

impl MarginalSpec {
    pub fn new(l: usize) -> Result<Self> {
        if !(1..=MAX_L).contains(&l) {
            return Err(Error::invalid(format!("marginal dimension must be in 1..={MAX_L}, got {l}")));
        }
        Ok(MarginalSpec { l })
    }
}

impl Default for MarginalSpec {
    fn default() -> Self {
        MarginalSpec { l: 2 }
    }
}

/// A marginal density value; `underflow` is set when every mixture component
/// vanished numerically and `value` was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalValue {
    pub value: f64,
    pub log_value: f64,
    pub underflow: bool,
}

/// `f_{l,θ}(y) = Σ_{i_1..i_l} μ(i_1) q_{i_1 i_2} ⋯ q_{i_{l-1} i_l} Π_t g_{γ_{i_t}}(y_t)`
/// with `l = y.len()`, accumulated in log space.
pub fn marginal_density(theta: &HmmParams, y: &[f64]) -> Result<MarginalValue> {
    MarginalSpec::new(y.len())?;
    let mu = stationary_distribution(theta)?.mu;
    Ok(marginal_with(theta, &mu, y))
}

fn marginal_with(theta: &HmmParams, mu: &[f64], y: &[f64]) -> MarginalValue {
    match forward(theta, y, mu) {
        Ok(f) => {
            let value = f.log_likelihood.exp();
            MarginalValue {
                value,
                log_value: f.log_likelihood,
                underflow: value == 0.0,
            }
        }
        Err(_) => MarginalValue {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
            underflow: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    MonteCarlo,
    Quadrature1D,
}

/// Estimate of `‖f_{l,a} − f_{l,b}‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_mc: usize,
    pub method: DistanceMethod,
}

struct Marginal<'a> {
    theta: &'a HmmParams,
    mu: Vec<f64>,
}

impl<'a> Marginal<'a> {
    fn new(theta: &'a HmmParams) -> Result<Self> {
        Ok(Marginal {
            theta,
            mu: stationary_distribution(theta)?.mu,
        })
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        marginal_with(self.theta, &self.mu, y).log_value
    }

    fn sample(&self, y: &mut [f64], rng: &mut Rng) {
        let em = self.theta.emission();
        let mut x = sample_categorical(&self.mu, rng);
        for (t, yt) in y.iter_mut().enumerate() {
            if t > 0 {
                x = sample_categorical(self.theta.row(x), rng);
            }
            *yt = em.sample(self.theta.gamma(x), rng);
        }
    }
}

/// `|f_a − f_b| / ((f_a + f_b)/2) = 2 tanh(|log f_a − log f_b| / 2)`.
fn balanced_integrand(la: f64, lb: f64) -> f64 {
    match (la == f64::NEG_INFINITY, lb == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 2.0,
        _ => 2.0 * (0.5 * (la - lb).abs()).tanh(),
    }
}

fn bit_identical(a: &HmmParams, b: &HmmParams) -> bool {
    a.emission() == b.emission()
        && a.k() == b.k()
        && a.transition().iter().zip(b.transition()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.gammas().iter().zip(b.gammas()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn order_key(t: &HmmParams) -> Vec<u64> {
    let mut v = vec![t.k() as u64];
    v.extend(t.gammas().iter().map(|x| x.to_bits()));
    v.extend(t.transition().iter().map(|x| x.to_bits()));
    v
}

/// Largest `k` for which [`canonical_labeling`] searches every permutation.
const CANONICAL_MAX_K: usize = 6;

/// A labeling of `theta` that depends only on its equivalence class under
/// state permutations: the relabeling with the smallest bit-level key.
/// Above six states, states are sorted by emission parameter and row instead.
pub fn canonical_labeling(theta: &HmmParams) -> HmmParams {
    let k = theta.k();
    if k <= CANONICAL_MAX_K {
        return all_permutations(k)
            .iter()
            .map(|p| theta.permute(p).expect("valid permutation"))
            .min_by(|a, b| order_key(a).cmp(&order_key(b)))
            .expect("at least one permutation");
    }
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| {
        let ki: Vec<u64> = std::iter::once(theta.gamma(i)).chain(theta.row(i).iter().copied()).map(f64::to_bits).collect();
        let kj: Vec<u64> = std::iter::once(theta.gamma(j)).chain(theta.row(j).iter().copied()).map(f64::to_bits).collect();
        ki.cmp(&kj)
    });
    let mut perm = vec![0; k];
    for (new, &old) in idx.iter().enumerate() {
        perm[old] = new;
    }
    theta.permute(&perm).expect("valid permutation")
}

fn check_pair(a: &HmmParams, b: &HmmParams) -> Result<()> {
    if a.emission() != b.emission() {
        return Err(Error::precondition(format!(
            "marginals of different emission families: {:?} vs {:?}",
            a.emission(),
            b.emission()
        )));
    }
    Ok(())
}

/// Monte-Carlo estimate of `‖f_{l,a} − f_{l,b}‖₁`.
///
/// Uses `E_h[|f_a − f_b|/h]` with `h = (f_a + f_b)/2`, sampling one point from
/// each of `f_a` and `f_b` per pair, so the integrand lies in `[0, 2]`.
/// `n_mc` is the number of density points drawn (rounded up to an even count).
pub fn l1_marginal_distance(a: &HmmParams, b: &HmmParams, l: usize, n_mc: usize, seed: u64, exec: Exec) -> Result<DistanceEstimate> {
    MarginalSpec::new(l)?;
    check_pair(a, b)?;
    if n_mc < MIN_N_MC {
        return Err(Error::precondition(format!("n_mc must be at least {MIN_N_MC}, got {n_mc}")));
    }
    let pairs = n_mc.div_ceil(2);
    // relabeling either argument or swapping them leaves the draws unchanged
    let (a, b) = (canonical_labeling(a), canonical_labeling(b));
    if bit_identical(&a, &b) {
        return Ok(DistanceEstimate {
            value: 0.0,
            std_err: 0.0,
            n_mc: 2 * pairs,
            method: DistanceMethod::MonteCarlo,
        });
    }
    let (a, b) = if order_key(&a) <= order_key(&b) { (a, b) } else { (b, a) };
    let fa = Marginal::new(&a)?;
    let fb = Marginal::new(&b)?;
    let base = split_seed(seed, stream::DISTANCE);
    let shards = exec.map(DISTANCE_SHARDS, |s| {
        let m = pairs / DISTANCE_SHARDS + usize::from(s < pairs % DISTANCE_SHARDS);
        let mut rng = stream_rng(base, s as u64);
        let mut ya = vec![0.0; l];
        let mut yb = vec![0.0; l];
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..m {
            fa.sample(&mut ya, &mut rng);
            fb.sample(&mut yb, &mut rng);
            let v = 0.5
                * (balanced_integrand(fa.log_density(&ya), fb.log_density(&ya))
                    + balanced_integrand(fa.log_density(&yb), fb.log_density(&yb)));
            sum += v;
            sumsq += v * v;
        }
        (sum, sumsq)
    });
    let (sum, sumsq) = shards.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let p = pairs as f64;
    let mean = sum / p;
    let var = ((sumsq - p * mean * mean) / (p - 1.0)).max(0.0);
    Ok(DistanceEstimate {
        value: mean,
        std_err: (var / p).sqrt(),
        n_mc: 2 * pairs,
        method: DistanceMethod::MonteCarlo,
    })
}

/// `‖f_{1,a} − f_{1,b}‖₁` for Gaussian emissions by adaptive Simpson over
/// `[min γ − 10σ, max γ + 10σ]`.
pub fn l1_distance_quadrature(a: &HmmParams, b: &HmmParams) -> Result<DistanceEstimate> {
    check_pair(a, b)?;
    let sigma = match a.emission() {
        EmissionModel::GaussianKnownVariance { sigma } => sigma,
        other => return Err(Error::precondition(format!("quadrature path needs gaussian emissions, got {other:?}"))),
    };
    let fa = Marginal::new(a)?;
    let fb = Marginal::new(b)?;
    let all = a.gammas().iter().chain(b.gammas());
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min) - 10.0 * sigma;
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max) + 10.0 * sigma;
    let f = |y: f64| (fa.log_density(&[y]).exp() - fb.log_density(&[y]).exp()).abs();
    // split so each panel sees at most a few kinks of |f_a - f_b|
    let panels = 400;
    let h = (hi - lo) / panels as f64;
    let value = (0..panels)
        .map(|i| adaptive_simpson(&f, lo + i as f64 * h, lo + (i + 1) as f64 * h, 1e-13))
        .sum();
    Ok(DistanceEstimate {
        value,
        std_err: 0.0,
        n_mc: 0,
        method: DistanceMethod::Quadrature1D,
    })
}

/// `‖f_{l,θ} − f_{l,θ₀}‖₁ · τ(θ)`, with `τ = s/(2 − s)` from the mixing profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedDistance {
    pub value: f64,
    pub tau: f64,
    pub distance: DistanceEstimate,
}

pub fn weighted_distance(theta: &HmmParams, theta0: &HmmParams, l: usize, n_mc: usize, seed: u64, exec: Exec) -> Result<WeightedDistance> {
    let distance = l1_marginal_distance(theta, theta0, l, n_mc, seed, exec)?;
    let tau = mixing_profile(theta).tau;
    Ok(WeightedDistance {
        value: distance.value * tau,
        tau,
        distance,
    })
}

/// Terms of the parameter-space lower bound on `‖f_{l,θ} − f_{l,θ₀}‖₁`, up to
/// the unknown constant `c(θ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundTerms {
    /// Stationary mass of states farther than `eps` from every `γ⁰_i`.
    pub emptied_mass: f64,
    /// `Σ_I |P_θ(X_{1:l} ∈ A(I)) − P_θ₀(X_{1:l} = I)|`.
    pub cell_mass: f64,
    /// `Σ_I ‖Σ_{J ∈ A(I)} P_θ(J) (γ_J − γ⁰_I)‖`.
    pub first_moment: f64,
    /// `½ Σ_I Σ_{J ∈ A(I)} P_θ(J) ‖γ_J − γ⁰_I‖²`.
    pub second_moment: f64,
    pub eps: f64,
}

impl LowerBoundTerms {
    pub fn total(&self) -> f64 {
        self.emptied_mass + self.cell_mass + self.first_moment + self.second_moment
    }
}

/// Smallest pairwise gap between the emission parameters of `theta0`
/// (infinite when `k0 = 1`).
pub fn min_gamma_gap(theta0: &HmmParams) -> f64 {
    let g = theta0.gammas();
    let mut gap = f64::INFINITY;
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            gap = gap.min((g[i] - g[j]).abs());
        }
    }
    gap
}

/// A quarter of the smallest gap, or 0.5 for a single true state.
pub fn default_eps(theta0: &HmmParams) -> f64 {
    let gap = min_gamma_gap(theta0);
    if gap.is_finite() {
        gap / 4.0
    } else {
        0.5
    }
}

/// `P(X_{1:l} = J)` for every `J ∈ {0..k}^l`, index `J` read base `k` with the
/// first coordinate most significant.
fn tuple_probs(theta: &HmmParams, mu: &[f64], l: usize) -> Vec<f64> {
    let k = theta.k();
    let mut probs = mu.to_vec();
    for _ in 1..l {
        let mut next = Vec::with_capacity(probs.len() * k);
        for (idx, &p) in probs.iter().enumerate() {
            let last = idx % k;
            next.extend(theta.row(last).iter().map(|&q| p * q));
        }
        probs = next;
    }
    probs
}

fn digits(mut idx: usize, k: usize, l: usize) -> Vec<usize> {
    let mut out = vec![0; l];
    for d in out.iter_mut().rev() {
        *d = idx % k;
        idx /= k;
    }
    out
}

/// Evaluates the bracketed lower-bound terms for `θ` against `θ₀` with cell
/// radius `eps`.
pub fn lower_bound_diagnostic(theta: &HmmParams, theta0: &HmmParams, l: usize, eps: f64) -> Result<LowerBoundTerms> {
    MarginalSpec::new(l)?;
    check_pair(theta, theta0)?;
    let gap = min_gamma_gap(theta0);
    if gap == 0.0 {
        return Err(Error::precondition("true emission parameters must be distinct"));
    }
    if !(eps > 0.0) || eps >= gap / 2.0 {
        return Err(Error::precondition(format!(
            "eps = {eps} must be positive and below half the smallest true gap {gap}"
        )));
    }
    let k = theta.k();
    let k0 = theta0.k();
    let g = theta.gammas();
    let g0 = theta0.gammas();
    let mu = stationary_distribution(theta)?.mu;
    let mu0 = stationary_distribution(theta0)?.mu;

    // cell[j] = the true state whose eps-ball holds γ_j; balls are disjoint
    let cell: Vec<Option<usize>> = g
        .iter()
        .map(|&gj| (0..k0).find(|&i| (gj - g0[i]).abs() <= eps))
        .collect();
    let emptied_mass = (0..k).filter(|&j| cell[j].is_none()).map(|j| mu[j]).sum();

    let p = tuple_probs(theta, &mu, l);
    let p0 = tuple_probs(theta0, &mu0, l);
    let n0 = p0.len();
    let mut mass = vec![0.0; n0];
    let mut first = vec![vec![0.0; l]; n0];
    let mut second = 0.0;
    for (idx, &pj) in p.iter().enumerate() {
        let js = digits(idx, k, l);
        let Some(is) = js.iter().map(|&j| cell[j]).collect::<Option<Vec<usize>>>() else {
            continue;
        };
        let i_idx = is.iter().fold(0, |acc, &i| acc * k0 + i);
        mass[i_idx] += pj;
        for t in 0..l {
            let diff = g[js[t]] - g0[is[t]];
            first[i_idx][t] += pj * diff;
            second += 0.5 * pj * diff * diff;
        }
    }
    let cell_mass = mass.iter().zip(&p0).map(|(m, q)| (m - q).abs()).sum();
    let first_moment = first.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).sum();
    Ok(LowerBoundTerms {
        emptied_mass,
        cell_mass,
        first_moment,
        second_moment: second,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::std_normal_cdf;

    fn em() -> EmissionModel {
        EmissionModel::gaussian(1.0)
    }

    #[test]
    fn spec_bounds() {
        assert!(MarginalSpec::new(0).is_err());
        assert!(MarginalSpec::new(5).is_err());
        assert_eq!(MarginalSpec::default().l, 2);
    }

    #[test]
    fn one_dimensional_mixture() {
        let t = HmmParams::two_state(em(), 0.3, 0.4, -1.0, 2.0).unwrap();
        let y = 0.4;
        let v = marginal_density(&t, &[y]).unwrap();
        let direct = 4.0 / 7.0 * em().density(-1.0, y) + 3.0 / 7.0 * em().density(2.0, y);
        assert!((v.value - direct).abs() < 1e-15);
        assert!(!v.underflow);
    }

    #[test]
    fn single_state_is_product() {
        let t = HmmParams::single(em(), 0.3).unwrap();
        let y = [0.1, -2.0, 1.5];
        let v = marginal_density(&t, &y).unwrap();
        let direct: f64 = y.iter().map(|&v| em().density(0.3, v)).product();
        assert!((v.value - direct).abs() < 1e-15 * direct.max(1.0));
    }

    #[test]
    fn underflow_is_flagged() {
        let t = HmmParams::single(em(), 0.0).unwrap();
        let v = marginal_density(&t, &[1e6]).unwrap();
        assert!(v.underflow);
        assert_eq!(v.value, 0.0);
        let p = HmmParams::single(EmissionModel::Poisson, 1.0).unwrap();
        assert!(marginal_density(&p, &[0.5]).unwrap().underflow);
    }

    #[test]
    fn gaussian_shift_closed_form() {
        let a = HmmParams::single(em(), 0.0).unwrap();
        let b = HmmParams::single(em(), 1.0).unwrap();
        let exact = 2.0 * (2.0 * std_normal_cdf(0.5) - 1.0);
        let q = l1_distance_quadrature(&a, &b).unwrap();
        assert!((q.value - exact).abs() < 1e-9, "{} vs {exact}", q.value);
        let mc = l1_marginal_distance(&a, &b, 1, 20_000, 5, Exec::Sequential).unwrap();
        assert!((mc.value - exact).abs() < 4.0 * mc.std_err);
    }

    #[test]
    fn identical_and_symmetric() {
        let a = HmmParams::two_state(em(), 0.3, 0.4, -1.0, 1.0).unwrap();
        let b = HmmParams::two_state(em(), 0.2, 0.5, -1.2, 1.1).unwrap();
        let d = l1_marginal_distance(&a, &a, 2, 1000, 1, Exec::Sequential).unwrap();
        assert_eq!((d.value, d.std_err), (0.0, 0.0));
        let ab = l1_marginal_distance(&a, &b, 2, 1000, 1, Exec::Parallel).unwrap();
        let ba = l1_marginal_distance(&b, &a, 2, 1000, 1, Exec::Sequential).unwrap();
        assert_eq!(ab, ba);
        assert!(l1_marginal_distance(&a, &b, 2, 99, 1, Exec::Sequential).is_err());
    }

    #[test]
    fn weighted_distance_vanishes_for_identity() {
        let id = HmmParams::two_state(em(), 0.0, 0.0, -1.0, 1.0).unwrap();
        let other = HmmParams::two_state(em(), 0.3, 0.3, 1.0, 3.0).unwrap();
        let w = weighted_distance(&id, &other, 2, 200, 0, Exec::Sequential).unwrap();
        assert_eq!(w.value, 0.0);
        assert!(w.distance.value > 0.5);
    }

    #[test]
    fn diagnostic_zero_at_truth_and_duplication() {
        let t0 = HmmParams::two_state(em(), 0.3, 0.4, -2.0, 2.0).unwrap();
        let terms = lower_bound_diagnostic(&t0, &t0, 2, default_eps(&t0)).unwrap();
        assert!(terms.total() < 1e-15);

        let s0 = HmmParams::single(em(), 0.7).unwrap();
        let dup = s0.duplicate_last_state(2).unwrap();
        let terms = lower_bound_diagnostic(&dup, &s0, 3, 0.5).unwrap();
        assert!(terms.total() < 1e-15, "{terms:?}");
    }

    #[test]
    fn diagnostic_emptied_mass() {
        // μ = (0.8, 0.2): q/(p+q) with p = 0.1, q = 0.4
        let s0 = HmmParams::single(em(), 0.0).unwrap();
        let t = HmmParams::two_state(em(), 0.1, 0.4, 0.0, 6.0).unwrap();
        let terms = lower_bound_diagnostic(&t, &s0, 2, 0.5).unwrap();
        assert!((terms.emptied_mass - 0.2).abs() < 1e-15);
    }

    #[test]
    fn diagnostic_rejects_wide_cells() {
        let t0 = HmmParams::two_state(em(), 0.3, 0.4, -1.0, 1.0).unwrap();
        assert!(lower_bound_diagnostic(&t0, &t0, 2, 1.0).is_err());
        assert!(lower_bound_diagnostic(&t0, &t0, 2, 0.99).is_ok());
    }
}
