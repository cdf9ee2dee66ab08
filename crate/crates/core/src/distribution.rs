//! Dense joint probability tables over ±1 variables.
//!
//! Entry `i` of a table over labels `l_0, …, l_{n-1}` is the probability of
//! the assignment whose bit `k` is the value of `l_k` (`+1 -> 0`, `-1 -> 1`),
//! see [`Assignment::from_index`].

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, DEFAULT_TOLERANCE};
use crate::tree::VertexId;

/// Size limits for dense tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_leaves: usize,
    pub max_vertices: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_leaves: 20,
            max_vertices: 24,
        }
    }
}

impl Caps {
    pub fn check_leaves(&self, n: usize) -> Result<()> {
        check_cap("leaf set", n, self.max_leaves)
    }

    pub fn check_vertices(&self, n: usize) -> Result<()> {
        check_cap("vertex set", n, self.max_vertices)
    }
}

fn check_cap(what: &'static str, size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::CapExceeded { what, size, cap })
    } else {
        Ok(())
    }
}

/// Hard ceiling on table width regardless of configured caps.
pub const MAX_TABLE_VARS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution<S> {
    labels: Vec<VertexId>,
    probs: Vec<S>,
}

impl<S: Scalar> JointDistribution<S> {
    /// Checks shape, nonnegativity and normalization (exact in rational
    /// mode, within 1e-12 otherwise).
    pub fn new(labels: Vec<VertexId>, probs: Vec<S>) -> Result<Self> {
        check_cap("distribution", labels.len(), MAX_TABLE_VARS)?;
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::InvalidArgument("duplicate distribution label".into()));
        }
        if probs.len() != 1usize << labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels need {} probabilities, got {}",
                labels.len(),
                1usize << labels.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| p.is_negative()) {
            return Err(Error::InvalidArgument("negative probability".into()));
        }
        let total = probs.iter().fold(S::zero(), |acc, p| acc + p.clone());
        if !total.approx_eq(&S::one(), DEFAULT_TOLERANCE) {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(JointDistribution { labels, probs })
    }

    pub(crate) fn from_parts_unchecked(labels: Vec<VertexId>, probs: Vec<S>) -> Self {
        debug_assert_eq!(probs.len(), 1usize << labels.len());
        JointDistribution { labels, probs }
    }

    /// Independent uniform bits.
    pub fn uniform(labels: Vec<VertexId>) -> Self {
        let n = labels.len();
        let p = S::one() / S::from_usize(1usize << n);
        JointDistribution {
            labels,
            probs: vec![p; 1usize << n],
        }
    }

    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn num_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn position(&self, label: VertexId) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::UnknownLabel(label))
    }

    /// Probability of a full assignment.
    pub fn prob_of(&self, full: &Assignment) -> Result<S> {
        if full.len() != self.labels.len() {
            return Err(Error::LabelMismatch);
        }
        let idx = full.index_over(&self.labels).ok_or(Error::LabelMismatch)?;
        Ok(self.probs[idx].clone())
    }

    fn mask_and_value(&self, partial: &Assignment) -> Result<(usize, usize)> {
        let mut mask = 0;
        let mut value = 0;
        for (l, s) in partial.iter() {
            let k = self.position(l)?;
            mask |= 1 << k;
            value |= s.bit() << k;
        }
        Ok((mask, value))
    }

    /// `Pr[partial]`.
    pub fn event_prob(&self, partial: &Assignment) -> Result<S> {
        let (mask, value) = self.mask_and_value(partial)?;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|&(i, _)| i & mask == value)
            .fold(S::zero(), |acc, (_, p)| acc + p.clone()))
    }

    /// Law of the remaining labels given `partial`, which must have positive
    /// probability.
    pub fn condition(&self, partial: &Assignment) -> Result<Self> {
        let (mask, value) = self.mask_and_value(partial)?;
        let keep: Vec<usize> = (0..self.labels.len())
            .filter(|k| mask & (1 << k) == 0)
            .collect();
        let mut probs = vec![S::zero(); 1usize << keep.len()];
        for (i, p) in self.probs.iter().enumerate() {
            if i & mask == value && !p.is_zero() {
                probs[compress(i, &keep)] = probs[compress(i, &keep)].clone() + p.clone();
            }
        }
        let total = probs.iter().fold(S::zero(), |acc, p| acc + p.clone());
        if total.is_zero() {
            return Err(Error::ZeroProbability);
        }
        for p in &mut probs {
            *p = p.clone() / total.clone();
        }
        Ok(JointDistribution {
            labels: keep.iter().map(|&k| self.labels[k]).collect(),
            probs,
        })
    }

    /// Marginal law of `labels`, in the order given.
    pub fn marginal(&self, labels: &[VertexId]) -> Result<Self> {
        let pos: Vec<usize> = labels
            .iter()
            .map(|&l| self.position(l))
            .collect::<Result<_>>()?;
        let mut probs = vec![S::zero(); 1usize << pos.len()];
        for (i, p) in self.probs.iter().enumerate() {
            let j = compress(i, &pos);
            probs[j] = probs[j].clone() + p.clone();
        }
        Ok(JointDistribution {
            labels: labels.to_vec(),
            probs,
        })
    }

    /// Same law with labels permuted into `labels` order.
    pub fn reorder(&self, labels: &[VertexId]) -> Result<Self> {
        if labels.len() != self.labels.len() {
            return Err(Error::LabelMismatch);
        }
        self.marginal(labels)
    }

    /// `E[X_l]`.
    pub fn mean(&self, label: VertexId) -> Result<S> {
        let k = self.position(label)?;
        Ok(self.probs.iter().enumerate().fold(S::zero(), |acc, (i, p)| {
            if (i >> k) & 1 == 0 {
                acc + p.clone()
            } else {
                acc - p.clone()
            }
        }))
    }

    /// Joint table of two labels.
    pub fn pair_table(&self, u: VertexId, v: VertexId) -> Result<PairTable<S>> {
        let (a, b) = (self.position(u)?, self.position(v)?);
        let mut t = PairTable::zero();
        for (i, p) in self.probs.iter().enumerate() {
            t.add((i >> a) & 1, (i >> b) & 1, p);
        }
        Ok(t)
    }

    /// `Cov[X_u, X_v]`; for `u == v` this is `Var[X_u]`.
    pub fn covariance(&self, u: VertexId, v: VertexId) -> Result<S> {
        if u == v {
            let m = self.mean(u)?;
            return Ok(S::one() - m.clone() * m);
        }
        Ok(self
            .pair_table(u, v)?
            .covariance()
            .expect("normalized table has positive mass"))
    }

    /// For every outcome `y` of `given` (in table order over `given`), the
    /// unnormalized joint table `Pr[X_given = y, X_u = ·, X_v = ·]`.
    pub fn pair_tables_given(
        &self,
        given: &[usize],
        u: usize,
        v: usize,
    ) -> Vec<PairTable<S>> {
        let mut out = vec![PairTable::zero(); 1usize << given.len()];
        for (i, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            out[compress(i, given)].add((i >> u) & 1, (i >> v) & 1, p);
        }
        out
    }

    /// Entrywise equality after aligning label order (exact / within `tol`).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> Result<bool> {
        let other = other.reorder(&self.labels)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .all(|(a, b)| a.approx_eq(b, tol)))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> JointDistribution<T> {
        JointDistribution {
            labels: self.labels.clone(),
            probs: self.probs.iter().map(f).collect(),
        }
    }
}

/// Gathers the bits of `i` at `positions` into a packed index.
pub(crate) fn compress(i: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &p)| acc | (((i >> p) & 1) << k))
}

/// Unnormalized 2×2 table over two ±1 variables, indexed `[a_bit][b_bit]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable<S>(pub [[S; 2]; 2]);

impl<S: Scalar> PairTable<S> {
    pub fn zero() -> Self {
        PairTable([[S::zero(), S::zero()], [S::zero(), S::zero()]])
    }

    fn add(&mut self, a: usize, b: usize, p: &S) {
        self.0[a][b] = self.0[a][b].clone() + p.clone();
    }

    pub fn total(&self) -> S {
        self.0
            .iter()
            .flatten()
            .fold(S::zero(), |acc, p| acc + p.clone())
    }

    /// Covariance of the normalized table; `None` for an empty table.
    pub fn covariance(&self) -> Option<S> {
        let total = self.total();
        if total.is_zero() {
            return None;
        }
        let [[pp, pm], [mp, mm]] = &self.0;
        // Cov = 4 (p++ p-- - p+- p-+) / total² for ±1 variables, but the
        // definitional form is kept here as the reference.
        let exy = (pp.clone() + mm.clone() - pm.clone() - mp.clone()) / total.clone();
        let ex = (pp.clone() + pm.clone() - mp.clone() - mm.clone()) / total.clone();
        let ey = (pp.clone() + mp.clone() - pm.clone() - mm.clone()) / total;
        Some(exy - ex * ey)
    }

    /// Mutual information (nats) of the normalized table, `0·ln 0 = 0`;
    /// `None` for an empty table.
    pub fn mutual_information(&self) -> Option<f64> {
        let cells: Vec<Vec<f64>> = self
            .0
            .iter()
            .map(|row| row.iter().map(Scalar::to_f64).collect())
            .collect();
        let total: f64 = cells.iter().flatten().sum();
        if total <= 0.0 {
            return None;
        }
        let row = [
            (cells[0][0] + cells[0][1]) / total,
            (cells[1][0] + cells[1][1]) / total,
        ];
        let col = [
            (cells[0][0] + cells[1][0]) / total,
            (cells[0][1] + cells[1][1]) / total,
        ];
        let mut mi = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let p = cells[a][b] / total;
                if p > 0.0 {
                    mi += p * (p / (row[a] * col[b])).ln();
                }
            }
        }
        Some(mi.max(0.0))
    }
}
