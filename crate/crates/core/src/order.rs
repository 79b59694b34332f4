//! Posterior order estimation by merging and emptying states.
//!
//! A sample `θ` keeps the states `J(θ) = {j : μ_θ(j) ≥ u_n}`. Within `J`,
//! `A_j = {i ∈ J : μ_θ(j) ‖γ_j − γ_i‖² ≤ v_n}` and two states merge when their
//! `A` sets meet, transitively. `L(θ)` is the number of merged classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hmm::{stationary_distribution, HmmParams};
use crate::priors::{RowPrior, TransitionPrior};
use crate::sampler::PosteriorTrace;

pub const SCHEDULE_MIN_N: usize = 8;
pub const DEFAULT_U_EXPONENT: f64 = 2.0 / 3.0;
pub const DEFAULT_V_EXPONENT: f64 = 5.0 / 6.0;

/// Which rate the schedule follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RateKind {
    /// `n^{−(ᾱ − k(k−1+d))/(2ᾱ)} log n`.
    Dirichlet { alpha_bar: f64, k: usize, d: usize },
    /// `n^{−1/2} (log n)^{3/2}`.
    Exponential,
}

impl RateKind {
    /// Builds the rate for a row prior, checking `ᾱ > k(k−1+d)`. Rows with
    /// different Dirichlet weights use the smallest `ᾱ`.
    pub fn for_prior(prior: &TransitionPrior, k: usize, d: usize) -> Result<Self> {
        let alpha_bar = (0..prior.k())
            .filter_map(|i| prior.row(i).alpha_bar())
            .fold(f64::INFINITY, f64::min);
        if alpha_bar.is_infinite() {
            return Ok(RateKind::Exponential);
        }
        let required = (k * (k - 1 + d)) as f64;
        if alpha_bar <= required {
            return Err(Error::RateCondition {
                alpha_bar,
                required,
                deficit: required - alpha_bar,
            });
        }
        Ok(RateKind::Dirichlet { alpha_bar, k, d })
    }

    pub fn for_row(row: &RowPrior, k: usize, d: usize) -> Result<Self> {
        Self::for_prior(&TransitionPrior::shared(k, row.clone()), k, d)
    }

    /// `(a, b)` with rate `n^{−a} (log n)^b`.
    fn exponents(&self) -> (f64, f64) {
        match *self {
            RateKind::Dirichlet { alpha_bar, k, d } => ((alpha_bar - (k * (k - 1 + d)) as f64) / (2.0 * alpha_bar), 1.0),
            RateKind::Exponential => (0.5, 1.5),
        }
    }

    /// The unscaled rate at a real sample size.
    pub fn rate(&self, n: f64) -> f64 {
        let (a, b) = self.exponents();
        n.powf(-a) * n.ln().powf(b)
    }
}

/// Tunables of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleOptions {
    /// Multiplies `w_n`; the rates fix only the order of magnitude.
    pub scale: f64,
    /// `u_n = w_n^{u_exponent}`.
    pub u_exponent: f64,
    /// `v_n = w_n^{v_exponent}`.
    pub v_exponent: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            scale: 1.0,
            u_exponent: DEFAULT_U_EXPONENT,
            v_exponent: DEFAULT_V_EXPONENT,
        }
    }
}

impl ScheduleOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("schedule scale must be positive, got {}", self.scale)));
        }
        if !(0.0 < self.u_exponent && self.u_exponent < self.v_exponent && self.v_exponent < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < u_exponent < v_exponent < 1, got {} and {}",
                self.u_exponent, self.v_exponent
            )));
        }
        Ok(())
    }
}

/// Thresholds `(u_n, v_n, w_n)` at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub n: usize,
    pub kind: RateKind,
    pub options: ScheduleOptions,
    pub u_n: f64,
    pub v_n: f64,
    pub w_n: f64,
    /// Smallest sample size from which `w_n < 1` holds for good, so that
    /// `v_n < u_n` and `w_n < u_n`.
    pub n_min: u64,
}

impl ThresholdSchedule {
    pub fn new(n: usize, kind: RateKind, options: ScheduleOptions) -> Result<Self> {
        options.validate()?;
        if n < SCHEDULE_MIN_N {
            return Err(Error::precondition(format!("schedule needs n >= {SCHEDULE_MIN_N}, got {n}")));
        }
        let w_n = options.scale * kind.rate(n as f64);
        Ok(ThresholdSchedule {
            n,
            kind,
            options,
            u_n: w_n.powf(options.u_exponent),
            v_n: w_n.powf(options.v_exponent),
            w_n,
            n_min: validity_floor(kind, options.scale),
        })
    }

    /// Whether `n ≥ n_min`, i.e. the thresholds are ordered `w_n < v_n < u_n`.
    pub fn is_valid(&self) -> bool {
        self.n as u64 >= self.n_min
    }
}

/// Default schedule for a row prior with emission dimension `d`.
pub fn threshold_schedule(n: usize, k: usize, d: usize, prior: &TransitionPrior) -> Result<ThresholdSchedule> {
    ThresholdSchedule::new(n, RateKind::for_prior(prior, k, d)?, ScheduleOptions::default())
}

fn validity_floor(kind: RateKind, scale: f64) -> u64 {
    let (a, b) = kind.exponents();
    // log w as a function of L = log n; it peaks at L = b/a
    let log_w = |l: f64| scale.ln() - a * l + b * l.ln();
    let l_min = (SCHEDULE_MIN_N as f64).ln();
    let l_max = (u64::MAX as f64).ln();
    let peak = (b / a).max(l_min);
    if peak >= l_max {
        return if log_w(l_max) < 0.0 && log_w(l_min) < 0.0 { SCHEDULE_MIN_N as u64 } else { u64::MAX };
    }
    if log_w(peak) < 0.0 {
        return SCHEDULE_MIN_N as u64;
    }
    if log_w(l_max) >= 0.0 {
        return u64::MAX;
    }
    let (mut lo, mut hi) = (peak, l_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_w(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut n = hi.exp().floor().max(SCHEDULE_MIN_N as f64) as u64;
    while n > SCHEDULE_MIN_N as u64 && log_w(((n - 1) as f64).ln()) < 0.0 {
        n -= 1;
    }
    while n < u64::MAX && log_w((n as f64).ln()) >= 0.0 {
        n += 1;
    }
    n
}

/// `L(θ)` and whether every state was emptied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCount {
    pub order: usize,
    pub emptied_all: bool,
    /// `|J(θ)|`.
    pub kept: usize,
}

/// `L(θ)` from stationary weights and emission parameters.
pub fn merged_count_from(mu: &[f64], gammas: &[f64], u_n: f64, v_n: f64) -> MergeCount {
    let kept: Vec<usize> = (0..mu.len()).filter(|&j| mu[j] >= u_n).collect();
    if kept.is_empty() {
        return MergeCount {
            order: 1,
            emptied_all: true,
            kept: 0,
        };
    }
    let m = kept.len();
    // a[x][y]: kept[y] ∈ A_{kept[x]}
    let a: Vec<Vec<bool>> = kept
        .iter()
        .map(|&j| {
            kept.iter()
                .map(|&i| {
                    let diff = gammas[j] - gammas[i];
                    mu[j] * diff * diff <= v_n
                })
                .collect()
        })
        .collect();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for x in 0..m {
        for y in x + 1..m {
            if (0..m).any(|z| a[x][z] && a[y][z]) {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
            }
        }
    }
    let order = (0..m).filter(|&x| find(&mut parent, x) == x).count();
    MergeCount {
        order,
        emptied_all: false,
        kept: m,
    }
}

pub fn merged_state_count(theta: &HmmParams, u_n: f64, v_n: f64) -> Result<MergeCount> {
    if !(u_n > 0.0 && v_n > 0.0) {
        return Err(Error::precondition(format!("thresholds must be positive, got u = {u_n}, v = {v_n}")));
    }
    let mu = stationary_distribution(theta)?.mu;
    Ok(merged_count_from(&mu, theta.gammas(), u_n, v_n))
}

/// Posterior distribution of `L(θ)` over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPosterior {
    pub pmf: BTreeMap<usize, f64>,
    pub mode: usize,
    pub n_samples: usize,
    pub schedule: ThresholdSchedule,
    pub emptied_all_count: usize,
}

impl OrderPosterior {
    pub fn prob(&self, order: usize) -> f64 {
        self.pmf.get(&order).copied().unwrap_or(0.0)
    }
}

pub fn posterior_order_of(samples: &[HmmParams], schedule: &ThresholdSchedule, exec: Exec) -> Result<OrderPosterior> {
    if samples.is_empty() {
        return Err(Error::precondition("no samples"));
    }
    let counts = exec
        .map_slice(samples, |s| merged_state_count(s, schedule.u_n, schedule.v_n))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &counts {
        *freq.entry(c.order).or_default() += 1;
    }
    let n = samples.len();
    // BTreeMap iterates in increasing order, so ties go to the smaller order
    let mode = freq
        .iter()
        .fold((0, 0), |best, (&l, &c)| if c > best.1 { (l, c) } else { best })
        .0;
    Ok(OrderPosterior {
        pmf: freq.into_iter().map(|(l, c)| (l, c as f64 / n as f64)).collect(),
        mode,
        n_samples: n,
        schedule: *schedule,
        emptied_all_count: counts.iter().filter(|c| c.emptied_all).count(),
    })
}

pub fn posterior_order(trace: &PosteriorTrace, schedule: &ThresholdSchedule, exec: Exec) -> Result<OrderPosterior> {
    posterior_order_of(&trace.samples, schedule, exec)
}
