//! Quantitative bounds: the inhomogeneous star lemma, the caterpillar
//! constant and its star-averaged quantity, the parity counterexample, and
//! the conjecture scanner in [`scan`].
//!
//! A hidden center `X_0` with leaves `Y_1..Y_m` at correlations `ρ_i`
//! satisfies `E[Var[X_0 | Y]] ≤ 4 Pr[X_0 ≠ S] ≤ 4 exp(-α/2)`, where
//! `α = Σ ρ_i²` and `S = sgn(Σ ρ_i Y_i)` with `sgn(0) = +1`.

pub mod scan;

use serde::Serialize;

use crate::distribution::{Caps, JointDistribution, MAX_TABLE_VARS};
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};
use crate::tree::{InfoFlowTree, VertexId};

/// `C = 4 (2 + e^{1/4} Σ_{k≥0} exp(-2^{k-2}) 2^{k+1})`, summed once in
/// 40-digit arithmetic and frozen; [`theorem_c_series`] re-derives it in
/// `f64` for the consistency test.
pub const THEOREM_C_CONSTANT: f64 = 57.818_690_140_645_23;

/// Constant `C` with `conjecture_b_lhs ≤ C / t` on simple caterpillars.
pub fn theorem_c_constant() -> f64 {
    THEOREM_C_CONSTANT
}

/// Term `k` of the dyadic series, `exp(-2^{k-2}) 2^{k+1}`.
pub fn theorem_c_series_term(k: u32) -> f64 {
    let scale = 2f64.powi(k as i32);
    (-scale / 4.0).exp() * 2.0 * scale
}

/// Partial sums of the dyadic series, stopping after the first term below
/// `1e-15`.
pub fn theorem_c_partial_sums() -> Vec<f64> {
    let mut sums = Vec::new();
    let mut total = 0.0;
    for k in 0.. {
        let term = theorem_c_series_term(k);
        total += term;
        sums.push(total);
        if term < 1e-15 {
            break;
        }
    }
    sums
}

/// The series value, about 9.6997.
pub fn theorem_c_series() -> f64 {
    *theorem_c_partial_sums().last().expect("series has terms")
}

/// `4 exp(-α/2)`.
pub fn star_bound(alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be ≥ 0, got {alpha}")));
    }
    Ok(4.0 * (-alpha / 2.0).exp())
}

/// A hidden center with leaves attached directly to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarSpec<S> {
    pub center: VertexId,
    pub leaves: Vec<VertexId>,
    pub rhos: Vec<S>,
    /// `Σ ρ_i²`.
    pub alpha: S,
}

impl<S: Scalar> StarSpec<S> {
    pub fn new(center: VertexId, leaves: Vec<VertexId>, rhos: Vec<S>) -> Result<Self> {
        if leaves.len() != rhos.len() {
            return Err(Error::InvalidArgument(format!(
                "{} leaves but {} correlations",
                leaves.len(),
                rhos.len()
            )));
        }
        let one = S::one();
        if let Some(r) = rhos.iter().find(|r| **r > one || **r < -one.clone()) {
            return Err(Error::CorrelationOutOfRange(r.to_string()));
        }
        let alpha = rhos
            .iter()
            .fold(S::zero(), |acc, r| acc + r.clone() * r.clone());
        Ok(StarSpec {
            center,
            leaves,
            rhos,
            alpha,
        })
    }

    /// Reads the star off a tree whose only internal vertex is the center.
    pub fn from_tree(tree: &InfoFlowTree<S>) -> Result<Self> {
        let internal: Vec<VertexId> = tree.internal_vertices().collect();
        let [center] = internal[..] else {
            return Err(Error::NotAStar);
        };
        let mut leaves = Vec::new();
        let mut rhos = Vec::new();
        for &l in tree.leaves() {
            let edge = tree.edge_between(center, l).map_err(|_| Error::NotAStar)?;
            leaves.push(l);
            rhos.push(edge.rho.value().clone());
        }
        Self::new(center, leaves, rhos)
    }

    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    /// For every leaf outcome (table order over `leaves`), the weights
    /// `A = Π(½ + ½ρ_i y_i)` and `B = Π(½ - ½ρ_i y_i)` and the statistic
    /// `Σ ρ_i y_i`. Then `Pr[X_0 = +1, y] = A/2` and `Pr[X_0 = -1, y] = B/2`.
    fn outcome_weights(&self, caps: &Caps) -> Result<Vec<(S, S, S)>> {
        caps.check_leaves(self.len())?;
        if self.len() > MAX_TABLE_VARS {
            return Err(Error::CapExceeded {
                what: "leaf set",
                size: self.len(),
                cap: MAX_TABLE_VARS,
            });
        }
        let mut rows = vec![(S::one(), S::one(), S::zero())];
        for r in &self.rhos {
            let agree = S::half() + S::half() * r.clone();
            let disagree = S::half() - S::half() * r.clone();
            // the new leaf becomes the high bit: y = +1 rows first
            let plus: Vec<(S, S, S)> = rows
                .iter()
                .map(|(a, b, s)| (a.clone() * agree.clone(), b.clone() * disagree.clone(), s.clone() + r.clone()))
                .collect();
            let minus = rows
                .into_iter()
                .map(|(a, b, s)| (a * disagree.clone(), b * agree.clone(), s - r.clone()));
            rows = plus.into_iter().chain(minus).collect();
        }
        Ok(rows)
    }

    /// `E[Var[X_0 | Y]] = Σ_y 2AB / (A + B)`.
    ///
    /// Outcome `-y` swaps `A` and `B`, so only the half with the last leaf
    /// at `+1` is visited, and terms are summed pairwise.
    pub fn expected_center_variance(&self, caps: &Caps) -> Result<S> {
        let rows = self.outcome_weights(caps)?;
        if self.is_empty() {
            return Ok(S::one());
        }
        let half = rows.len() / 2;
        let four = S::from_usize(4);
        let terms = rows
            .into_iter()
            .take(half)
            .filter(|(a, b, _)| !(a.clone() + b.clone()).is_zero())
            .map(|(a, b, _)| four.clone() * a.clone() * b.clone() / (a + b))
            .collect();
        Ok(pairwise_sum(terms))
    }

    /// `Pr[X_0 ≠ sgn(Σ ρ_i Y_i)]` with `sgn(0) = +1`.
    pub fn sign_disagreement(&self, caps: &Caps) -> Result<S> {
        Ok(self
            .outcome_weights(caps)?
            .into_iter()
            .fold(S::zero(), |acc, (a, b, s)| {
                let wrong = if s >= S::zero() { b } else { a };
                acc + S::half() * wrong
            }))
    }
}

/// Exact `E[Var[X_0 | leaves]]` for a star-shaped tree.
pub fn star_expected_center_variance<S: Scalar>(tree: &InfoFlowTree<S>, caps: &Caps) -> Result<S> {
    StarSpec::from_tree(tree)?.expected_center_variance(caps)
}

/// Average over position pairs `u ≠ v` of `|ρ_u| |ρ_v| exp(-α(u,v)/2)`,
/// with `α(u,v)` summing `ρ_i²` strictly between `u` and `v`.
pub fn theorem_c_star_quantity(rhos: &[f64]) -> Result<f64> {
    let t = rhos.len();
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two correlations required, found {t}"
        )));
    }
    let mut prefix = vec![0.0f64; t + 1];
    for (i, r) in rhos.iter().enumerate() {
        prefix[i + 1] = prefix[i] + r * r;
    }
    let mut total = 0.0;
    for u in 0..t {
        for v in u + 1..t {
            let alpha = prefix[v] - prefix[u + 1];
            total += rhos[u].abs() * rhos[v].abs() * (-alpha / 2.0).exp();
        }
    }
    // ordered pairs count each unordered pair twice
    Ok(total / ((t * (t - 1) / 2) as f64))
}

/// Uniform law on `X_1..X_{T+2}` conditioned on `X_1 ⋯ X_{T+2} = 1`.
///
/// Conditioning on fewer than `T` variables leaves every pair independent,
/// while conditioning on `T` of them fixes the product of the other two.
pub fn parity_counterexample<S: Scalar>(big_t: usize, caps: &Caps) -> Result<JointDistribution<S>> {
    if big_t == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    let n = big_t + 2;
    caps.check_leaves(n)?;
    if n > MAX_TABLE_VARS {
        return Err(Error::CapExceeded {
            what: "leaf set",
            size: n,
            cap: MAX_TABLE_VARS,
        });
    }
    let mass = S::one() / S::from_usize(1usize << (n - 1));
    let probs = (0..1usize << n)
        .map(|i| {
            if i.count_ones() % 2 == 0 {
                mass.clone()
            } else {
                S::zero()
            }
        })
        .collect();
    let labels = (1..=n as u32).map(VertexId).collect();
    JointDistribution::new(labels, probs)
}
