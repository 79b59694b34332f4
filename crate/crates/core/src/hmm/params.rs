use serde::{Deserialize, Serialize};

use super::emission::EmissionModel;
use crate::error::{Error, Result};

/// Tolerance on row sums of a transition matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A point `θ` of the parameter space: a `k × k` transition matrix and one
/// emission parameter per hidden state.
///
/// States are indexed from 0. The transition matrix is stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct HmmParams {
    emission: EmissionModel,
    k: usize,
    q: Vec<f64>,
    gammas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    emission: EmissionModel,
    rows: Vec<Vec<f64>>,
    gammas: Vec<f64>,
}

impl TryFrom<ParamsRepr> for HmmParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        HmmParams::new(r.emission, r.rows, r.gammas)
    }
}

impl From<HmmParams> for ParamsRepr {
    fn from(p: HmmParams) -> Self {
        ParamsRepr {
            emission: p.emission,
            rows: p.rows().map(<[f64]>::to_vec).collect(),
            gammas: p.gammas,
        }
    }
}

impl HmmParams {
    pub fn new(emission: EmissionModel, rows: Vec<Vec<f64>>, gammas: Vec<f64>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("transition matrix must be square"));
        }
        Self::from_flat(emission, k, rows.concat(), gammas)
    }

    /// Builds from a row-major transition matrix.
    pub fn from_flat(emission: EmissionModel, k: usize, q: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        let p = HmmParams {
            emission,
            k,
            q,
            gammas,
        };
        p.validate()?;
        Ok(p)
    }

    /// Two-state chain `Q = [[1-p, p], [q, 1-q]]` with emission parameters `(γ1, γ2)`.
    pub fn two_state(emission: EmissionModel, p: f64, q: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        Self::new(
            emission,
            vec![vec![1.0 - p, p], vec![q, 1.0 - q]],
            vec![gamma1, gamma2],
        )
    }

    /// Single-state model.
    pub fn single(emission: EmissionModel, gamma: f64) -> Result<Self> {
        Self::from_flat(emission, 1, vec![1.0], vec![gamma])
    }

    pub fn validate(&self) -> Result<()> {
        self.emission.validate()?;
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.q.len() != self.k * self.k {
            return Err(Error::invalid(format!(
                "transition matrix has {} entries, expected {}",
                self.q.len(),
                self.k * self.k
            )));
        }
        if self.gammas.len() != self.k {
            return Err(Error::invalid(format!(
                "expected {} emission parameters, got {}",
                self.k,
                self.gammas.len()
            )));
        }
        for (i, row) in self.rows().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid(format!("row {i} has a negative or non-finite entry: {row:?}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        for (i, &g) in self.gammas.iter().enumerate() {
            if !self.emission.admits(g) {
                return Err(Error::invalid(format!("gamma_{i} = {g} outside the parameter space")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn emission(&self) -> EmissionModel {
        self.emission
    }

    #[inline]
    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.k + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.q.chunks_exact(self.k)
    }

    /// Row-major transition matrix.
    pub fn transition(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn gamma(&self, i: usize) -> f64 {
        self.gammas[i]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `(p, q)` of a two-state chain.
    pub fn two_state_pq(&self) -> Option<(f64, f64)> {
        (self.k == 2).then(|| (self.q(0, 1), self.q(1, 0)))
    }

    /// Smallest entry of the transition matrix.
    pub fn min_entry(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest off-diagonal entry; `+inf` when `k = 1`.
    pub fn min_off_diagonal(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.k {
            for j in 0..self.k {
                if i != j {
                    m = m.min(self.q(i, j));
                }
            }
        }
        m
    }

    /// Replaces row `i`, renormalizing away round-off.
    pub(crate) fn set_row(&mut self, i: usize, row: &[f64]) {
        let s: f64 = row.iter().sum();
        for (dst, &v) in self.q[i * self.k..(i + 1) * self.k].iter_mut().zip(row) {
            *dst = v / s;
        }
    }

    pub(crate) fn set_gammas(&mut self, gammas: Vec<f64>) {
        debug_assert_eq!(gammas.len(), self.k);
        self.gammas = gammas;
    }

    pub fn with_gammas(&self, gammas: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.emission, self.k, self.q.clone(), gammas)
    }

    /// Relabels states: state `i` of `self` becomes state `perm[i]` of the result.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k;
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::precondition(format!("{perm:?} is not a permutation of 0..{k}")));
        }
        let mut q = vec![0.0; k * k];
        let mut gammas = vec![0.0; k];
        for i in 0..k {
            gammas[perm[i]] = self.gammas[i];
            for j in 0..k {
                q[perm[i] * k + perm[j]] = self.q(i, j);
            }
        }
        Ok(HmmParams {
            emission: self.emission,
            k,
            q,
            gammas,
        })
    }

    /// Embeds a `k0`-state model into `k ≥ k0` states by splitting the last
    /// true state into `k - k0 + 1` copies that share its emission parameter.
    ///
    /// Rows of the copies repeat the last true row; transition mass into the
    /// last true state is split evenly among the copies. The resulting
    /// observation process has the same law as under `self`.
    pub fn duplicate_last_state(&self, k: usize) -> Result<Self> {
        let k0 = self.k;
        if k < k0 {
            return Err(Error::precondition(format!("cannot embed {k0} states into {k}")));
        }
        let copies = (k - k0 + 1) as f64;
        let last = k0 - 1;
        let mut q = vec![0.0; k * k];
        for i in 0..k {
            let src = i.min(last);
            for j in 0..k {
                q[i * k + j] = if j < last {
                    self.q(src, j)
                } else {
                    self.q(src, last) / copies
                };
            }
        }
        let mut gammas = self.gammas.clone();
        gammas.resize(k, self.gammas[last]);
        Self::from_flat(self.emission, k, q, gammas)
    }
}

/// Every permutation of `0..k`, in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Observations `y_1..y_n` with the states that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub y: Vec<f64>,
    /// Hidden path that generated `y`, 0-based, when known.
    pub x_true: Option<Vec<usize>>,
    pub seed: u64,
    pub theta_true: Option<HmmParams>,
}

impl ObservationSequence {
    /// Observations of unknown origin.
    pub fn from_values(y: Vec<f64>) -> Result<Self> {
        let s = ObservationSequence {
            y,
            x_true: None,
            seed: 0,
            theta_true: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::invalid("observation sequence must be nonempty"));
        }
        if let Some(x) = &self.x_true {
            if x.len() != self.y.len() {
                return Err(Error::invalid("x_true and y lengths differ"));
            }
            if let Some(theta) = &self.theta_true {
                if x.iter().any(|&s| s >= theta.k()) {
                    return Err(Error::invalid("x_true contains a state outside 0..k"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> EmissionModel {
        EmissionModel::gaussian(1.0)
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(HmmParams::new(g(), vec![vec![0.5, 0.6], vec![0.5, 0.5]], vec![0.0, 1.0]).is_err());
        assert!(HmmParams::new(g(), vec![vec![1.5, -0.5], vec![0.5, 0.5]], vec![0.0, 1.0]).is_err());
        assert!(HmmParams::new(g(), vec![vec![1.0]], vec![0.0, 1.0]).is_err());
        assert!(HmmParams::new(g(), vec![], vec![]).is_err());
        assert!(HmmParams::new(EmissionModel::Poisson, vec![vec![1.0]], vec![0.0]).is_err());
    }

    #[test]
    fn permute_roundtrip() {
        let t = HmmParams::new(
            g(),
            vec![vec![0.2, 0.3, 0.5], vec![0.1, 0.8, 0.1], vec![0.6, 0.2, 0.2]],
            vec![-1.0, 0.0, 2.0],
        )
        .unwrap();
        let perm = [2, 0, 1];
        let p = t.permute(&perm).unwrap();
        assert_eq!(p.q(2, 0), t.q(0, 1));
        assert_eq!(p.gamma(2), -1.0);
        let inv = [1, 2, 0];
        assert_eq!(p.permute(&inv).unwrap(), t);
        assert!(t.permute(&[0, 0, 1]).is_err());
        assert_eq!(all_permutations(3).len(), 6);
    }

    #[test]
    fn duplication_keeps_rows_stochastic() {
        let t0 = HmmParams::two_state(g(), 0.3, 0.4, -1.0, 1.0).unwrap();
        let t = t0.duplicate_last_state(4).unwrap();
        assert_eq!(t.k(), 4);
        assert_eq!(t.gammas(), &[-1.0, 1.0, 1.0, 1.0]);
        assert!((t.q(0, 1) + t.q(0, 2) + t.q(0, 3) - 0.3).abs() < 1e-15);
        assert_eq!(t.row(3), t.row(1));
    }

    #[test]
    fn serde_roundtrip_is_bit_exact() {
        let t = HmmParams::two_state(g(), 0.1 + 0.2, 1.0 / 3.0, -0.1, 2.0f64.sqrt()).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: HmmParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
