//! Conditional covariance of two vertex variables in closed form.
//!
//! Cut the tree along the path `v_1, …, v_m` between the two vertices and
//! let `T_i` be what hangs off `v_i`. For events `L_i` living in `T_i`, with
//! `λ_i^± = Pr[L_i | X_{v_i} = ±1]` and `L = ∩ L_i`,
//!
//! ```text
//! Cov[X_1, X_m | L] = ∏ ρ_i · ∏ λ_i^+ λ_i^- / Pr[L]²
//! ```
//!
//! so the sign of the conditional covariance is the sign of the path
//! product. [`BruteForceOracle`] recomputes the same numbers from the full
//! vertex joint law.

use serde_json::{json, Value};

use crate::assignment::Assignment;
use crate::distribution::{Caps, JointDistribution, PairTable};
use crate::error::{Error, Result};
use crate::inference::{subtree_lambdas, vertex_joint_bruteforce};
use crate::scalar::{pairwise_sum, Scalar};
use crate::tree::{InfoFlowTree, VertexId};

/// `∏ ρ(e)` along the `u`–`v` path, which is the unconditional covariance.
pub fn path_covariance<S: Scalar>(tree: &InfoFlowTree<S>, u: VertexId, v: VertexId) -> Result<S> {
    if u == v {
        return Err(Error::InvalidArgument(
            "path covariance needs two distinct vertices".into(),
        ));
    }
    let path = tree.path(u, v)?;
    path.windows(2).try_fold(S::one(), |acc, w| {
        Ok(acc * tree.edge_between(w[0], w[1])?.rho.value().clone())
    })
}

/// A path `v_1, …, v_m` with the subtree hanging off each path vertex.
#[derive(Debug, Clone)]
pub struct PathDecomposition<'a, S> {
    tree: &'a InfoFlowTree<S>,
    path: Vec<VertexId>,
    spine: Vec<S>,
    /// `subtrees[i]`: vertices of `T_i`, `v_i` included, sorted.
    subtrees: Vec<Vec<VertexId>>,
}

impl<'a, S: Scalar> PathDecomposition<'a, S> {
    /// Decomposition along the `u`–`v` path; `u == v` gives `m = 1`.
    pub fn new(tree: &'a InfoFlowTree<S>, u: VertexId, v: VertexId) -> Result<Self> {
        let path = tree.path(u, v)?;
        let spine = path
            .windows(2)
            .map(|w| Ok(tree.edge_between(w[0], w[1])?.rho.value().clone()))
            .collect::<Result<_>>()?;
        let subtrees = (0..path.len())
            .map(|i| tree.component_without(path[i], &Self::cut_at(&path, i)))
            .collect::<Result<_>>()?;
        Ok(PathDecomposition {
            tree,
            path,
            spine,
            subtrees,
        })
    }

    fn cut_at(path: &[VertexId], i: usize) -> Vec<VertexId> {
        let mut cut = Vec::with_capacity(2);
        if i > 0 {
            cut.push(path[i - 1]);
        }
        if i + 1 < path.len() {
            cut.push(path[i + 1]);
        }
        cut
    }

    pub fn tree(&self) -> &'a InfoFlowTree<S> {
        self.tree
    }

    pub fn path(&self) -> &[VertexId] {
        &self.path
    }

    /// `ρ_1, …, ρ_{m-1}`.
    pub fn spine_correlations(&self) -> &[S] {
        &self.spine
    }

    pub fn subtree(&self, i: usize) -> &[VertexId] {
        &self.subtrees[i]
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// Splits a leaf outcome into the per-subtree events `L_i`.
    pub fn split_outcome(&self, outcome: &Assignment) -> Result<Vec<Assignment>> {
        let mut events = vec![Assignment::new(); self.len()];
        for (l, s) in outcome.iter() {
            if !self.tree.is_leaf(l) {
                return Err(Error::NotLeaf(l));
            }
            let i = self
                .subtrees
                .iter()
                .position(|t| t.binary_search(&l).is_ok())
                .ok_or(Error::UnknownVertex(l))?;
            events[i].insert(l, s);
        }
        Ok(events)
    }

    /// `[λ_i^+, λ_i^-]` for each path vertex.
    pub fn lambdas(&self, events: &[Assignment]) -> Result<Vec<[S; 2]>> {
        if events.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "{} events for a path of {} vertices",
                events.len(),
                self.len()
            )));
        }
        events
            .iter()
            .enumerate()
            .map(|(i, ev)| {
                for l in ev.labels() {
                    if self.subtrees[i].binary_search(&l).is_err() {
                        return Err(Error::InvalidArgument(format!(
                            "event label {l} is outside the subtree at {}",
                            self.path[i]
                        )));
                    }
                    if !self.tree.is_leaf(l) {
                        return Err(Error::NotLeaf(l));
                    }
                }
                subtree_lambdas(self.tree, self.path[i], &Self::cut_at(&self.path, i), ev)
            })
            .collect()
    }
}

/// `Pr[L]` by a forward pass along the path.
fn event_probability<S: Scalar>(rhos: &[S], lambdas: &[[S; 2]]) -> S {
    let mut alpha = [
        S::half() * lambdas[0][0].clone(),
        S::half() * lambdas[0][1].clone(),
    ];
    for (rho, lam) in rhos.iter().zip(&lambdas[1..]) {
        let same = S::half() + S::half() * rho.clone();
        let diff = S::half() - S::half() * rho.clone();
        let [p, m] = alpha;
        alpha = [
            (same.clone() * p.clone() + diff.clone() * m.clone()) * lam[0].clone(),
            (diff * p + same * m) * lam[1].clone(),
        ];
    }
    let [p, m] = alpha;
    p + m
}

/// The closed form from raw per-subtree event probabilities `[λ^+, λ^-]`.
/// Returns the covariance and `Pr[L]`.
pub fn covariance_from_lambdas<S: Scalar>(rhos: &[S], lambdas: &[[S; 2]]) -> Result<(S, S)> {
    if lambdas.is_empty() || rhos.len() + 1 != lambdas.len() {
        return Err(Error::InvalidArgument(format!(
            "{} correlations need {} λ pairs, got {}",
            rhos.len(),
            rhos.len() + 1,
            lambdas.len()
        )));
    }
    let pr_l = event_probability(rhos, lambdas);
    if pr_l.is_zero() {
        return Err(Error::ZeroProbability);
    }
    let numer = rhos
        .iter()
        .cloned()
        .chain(lambdas.iter().map(|[p, m]| p.clone() * m.clone()))
        .fold(S::one(), |acc, x| acc * x);
    Ok((numer / (pr_l.clone() * pr_l.clone()), pr_l))
}

/// `Cov[X_{v_1}, X_{v_m} | L]` from the closed form.
pub fn conditional_covariance_formula<S: Scalar>(
    decomp: &PathDecomposition<'_, S>,
    events: &[Assignment],
) -> Result<S> {
    let lambdas = decomp.lambdas(events)?;
    covariance_from_lambdas(decomp.spine_correlations(), &lambdas).map(|(c, _)| c)
}

/// Tables behind the ratio form: `Pr[X̄ = x]` and `Pr[X̄ = x, L]` for every
/// path assignment `x` (bit `i` is path vertex `i`), and `Pr[L]` as their sum.
struct RatioTables<S> {
    prior: Vec<S>,
    joint: Vec<S>,
    pr_l: S,
    rho_prod: S,
}

impl<S: Scalar> RatioTables<S> {
    fn new(decomp: &PathDecomposition<'_, S>, events: &[Assignment]) -> Result<Self> {
        let lambdas = decomp.lambdas(events)?;
        let rhos = decomp.spine_correlations();
        let prior: Vec<S> = (0..1usize << decomp.len())
            .map(|bits| {
                rhos.iter().enumerate().fold(S::half(), |acc, (i, rho)| {
                    let same = (bits >> i) & 1 == (bits >> (i + 1)) & 1;
                    let half_rho = S::half() * rho.clone();
                    acc * if same {
                        S::half() + half_rho
                    } else {
                        S::half() - half_rho
                    }
                })
            })
            .collect();
        let joint: Vec<S> = prior
            .iter()
            .enumerate()
            .map(|(bits, p)| {
                lambdas
                    .iter()
                    .enumerate()
                    .fold(p.clone(), |acc, (i, lam)| acc * lam[(bits >> i) & 1].clone())
            })
            .collect();
        let pr_l = pairwise_sum(joint.clone());
        if pr_l.is_zero() {
            return Err(Error::ZeroProbability);
        }
        Ok(RatioTables {
            prior,
            joint,
            pr_l,
            rho_prod: rhos.iter().fold(S::one(), |acc, r| acc * r.clone()),
        })
    }

    fn value(&self, bits: usize) -> Result<S> {
        let neg = bits ^ (self.prior.len() - 1);
        let (px, pnx) = (&self.prior[bits], &self.prior[neg]);
        if px.is_zero() || pnx.is_zero() {
            return Err(Error::ZeroProbability);
        }
        let ratio = |b: usize, p: &S| self.joint[b].clone() / self.pr_l.clone() / p.clone();
        Ok(self.rho_prod.clone() * ratio(bits, px) * ratio(neg, pnx))
    }
}

/// The ratio form: `∏ρ_i · Pr[X̄=x | L]/Pr[X̄=x] · Pr[X̄=-x | L]/Pr[X̄=-x]`
/// for an assignment `x` to the path vertices, with `Pr[L]` summed over all
/// `2^m` path assignments.
pub fn conditional_covariance_ratio<S: Scalar>(
    decomp: &PathDecomposition<'_, S>,
    events: &[Assignment],
    x: &Assignment,
) -> Result<S> {
    let path = decomp.path();
    if x.len() != path.len() {
        return Err(Error::LabelMismatch);
    }
    let bits = x.index_over(path).ok_or(Error::LabelMismatch)?;
    RatioTables::new(decomp, events)?.value(bits)
}

/// The ratio form for every path assignment, in table order over the path
/// (first path vertex is the low bit). Entries for `x` with `Pr[X̄ = x] = 0`
/// or `Pr[X̄ = -x] = 0` are `Err(ZeroProbability)`.
pub fn conditional_covariance_ratio_all<S: Scalar>(
    decomp: &PathDecomposition<'_, S>,
    events: &[Assignment],
) -> Result<Vec<Result<S>>> {
    let tables = RatioTables::new(decomp, events)?;
    Ok((0..tables.prior.len()).map(|bits| tables.value(bits)).collect())
}

/// Definitional conditional covariances read off the full vertex joint law.
#[derive(Debug, Clone)]
pub struct BruteForceOracle<S> {
    joint: JointDistribution<S>,
}

impl<S: Scalar> BruteForceOracle<S> {
    pub fn new(tree: &InfoFlowTree<S>, caps: &Caps) -> Result<Self> {
        Ok(BruteForceOracle {
            joint: vertex_joint_bruteforce(tree, caps)?,
        })
    }

    pub fn joint(&self) -> &JointDistribution<S> {
        &self.joint
    }

    /// `Cov[X_u, X_v | outcome]`; `u == v` gives the conditional variance.
    pub fn cond_cov(&self, u: VertexId, v: VertexId, outcome: &Assignment) -> Result<S> {
        let (a, b) = (self.joint.position(u)?, self.joint.position(v)?);
        let mut mask = 0usize;
        let mut value = 0usize;
        for (l, s) in outcome.iter() {
            let k = self.joint.position(l)?;
            mask |= 1 << k;
            value |= s.bit() << k;
        }
        let mut table = PairTable::<S>::zero();
        for (i, p) in self.joint.probs().iter().enumerate() {
            if i & mask == value {
                let cell = &mut table.0[(i >> a) & 1][(i >> b) & 1];
                *cell = cell.clone() + p.clone();
            }
        }
        table.covariance().ok_or(Error::ZeroProbability)
    }

    /// For every outcome of `given` (table order over `given`), the joint
    /// table of `(X_u, X_v)` with that outcome.
    pub fn outcome_tables(
        &self,
        u: VertexId,
        v: VertexId,
        given: &[VertexId],
    ) -> Result<Vec<PairTable<S>>> {
        let pos: Vec<usize> = given
            .iter()
            .map(|&l| self.joint.position(l))
            .collect::<Result<_>>()?;
        Ok(self
            .joint
            .pair_tables_given(&pos, self.joint.position(u)?, self.joint.position(v)?))
    }
}

/// Oracle for one conditional covariance; `outcome` must name leaves.
pub fn conditional_covariance_bruteforce<S: Scalar>(
    tree: &InfoFlowTree<S>,
    u: VertexId,
    v: VertexId,
    outcome: &Assignment,
    caps: &Caps,
) -> Result<S> {
    if let Some(l) = outcome.labels().find(|&l| !tree.is_leaf(l)) {
        return Err(Error::NotLeaf(l));
    }
    BruteForceOracle::new(tree, caps)?.cond_cov(u, v, outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeCovariance<S> {
    pub outcome: Assignment,
    pub probability: S,
    pub covariance: S,
}

/// Conditional covariances over all positive-probability outcomes of the
/// conditioning leaves, and `E|Cov|` over those outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CondCovReport<S> {
    pub u: VertexId,
    pub v: VertexId,
    pub conditioning: Vec<VertexId>,
    pub outcomes: Vec<OutcomeCovariance<S>>,
    pub expectation: S,
}

impl<S: Scalar> CondCovReport<S> {
    pub fn to_json(&self) -> Value {
        json!({
            "mode": S::MODE,
            "u": self.u,
            "v": self.v,
            "conditioning": self.conditioning,
            "outcomes": self.outcomes.iter().map(|o| json!({
                "outcome": o.outcome,
                "probability": o.probability.to_json(),
                "covariance": o.covariance.to_json(),
            })).collect::<Vec<_>>(),
            "expectation": self.expectation.to_json(),
        })
    }
}

/// `E[|Cov[X_u, X_v | Y]|]` with `Y` the values of `conditioning`.
///
/// Outcomes are visited in table order over `conditioning` (first label is
/// the low bit), which fixes the float summation order. Zero-probability
/// outcomes are left out.
pub fn expected_abs_cond_cov<S: Scalar>(
    tree: &InfoFlowTree<S>,
    u: VertexId,
    v: VertexId,
    conditioning: &[VertexId],
    caps: &Caps,
) -> Result<CondCovReport<S>> {
    caps.check_leaves(conditioning.len())?;
    for (k, &l) in conditioning.iter().enumerate() {
        if l == u || l == v {
            return Err(Error::InvalidArgument(format!(
                "vertex {l} is both measured and conditioned on"
            )));
        }
        if !tree.is_leaf(l) {
            return Err(Error::NotLeaf(l));
        }
        if conditioning[..k].contains(&l) {
            return Err(Error::InvalidArgument(format!("leaf {l} listed twice")));
        }
    }
    let decomp = PathDecomposition::new(tree, u, v)?;
    let mut outcomes = Vec::new();
    let mut expectation = S::zero();
    for idx in 0..1usize << conditioning.len() {
        let outcome = Assignment::from_index(conditioning, idx);
        let lambdas = decomp.lambdas(&decomp.split_outcome(&outcome)?)?;
        match covariance_from_lambdas(decomp.spine_correlations(), &lambdas) {
            Ok((covariance, probability)) => {
                expectation = expectation + probability.clone() * covariance.abs();
                outcomes.push(OutcomeCovariance {
                    outcome,
                    probability,
                    covariance,
                });
            }
            Err(Error::ZeroProbability) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(CondCovReport {
        u,
        v,
        conditioning: conditioning.to_vec(),
        outcomes,
        expectation,
    })
}

/// Every leaf of `tree` except `exclude`, in leaf order.
pub fn other_leaves<S>(tree: &InfoFlowTree<S>, exclude: &[VertexId]) -> Vec<VertexId> {
    tree.leaves()
        .iter()
        .copied()
        .filter(|l| !exclude.contains(l))
        .collect()
}
