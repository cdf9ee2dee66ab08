//! Averaged covariance and information quantities of a joint law.
//!
//! `avg_cov_cond(X, t)` averages, over size-`t` label sets `J`, over pairs
//! `u < v` outside `J`, the expectation over outcomes `y` of `X_J` of
//! `|Cov[X_u, X_v | X_J = y]|`. The inner expectation is a number, so every
//! outcome contributes `Pr[y]·|Cov|` and impossible outcomes contribute 0.
//! [`avg_info_cond`] is the same triple average with mutual information
//! (in nats) in place of `|Cov|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::expected_abs_cond_cov;
use crate::distribution::{Caps, JointDistribution, PairTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{InfoFlowTree, VertexId};

/// Value of one metric at each conditioning order `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries<S> {
    pub metric: String,
    /// Number of variables of the underlying law.
    pub n: usize,
    pub values: Vec<(usize, S)>,
}

fn require_pairs<S: Scalar>(dist: &JointDistribution<S>) -> Result<usize> {
    let n = dist.labels().len();
    require_n(n)?;
    Ok(n)
}

fn check_order(n: usize, t: usize) -> Result<()> {
    if t + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "conditioning order {t} out of range 0..={} for {n} variables",
            n - 2
        )));
    }
    Ok(())
}

/// Average `|Cov[X_u, X_v]|` over unordered distinct pairs.
pub fn avg_covariance<S: Scalar>(dist: &JointDistribution<S>) -> Result<S> {
    let n = require_pairs(dist)?;
    let labels = dist.labels();
    let mut sum = S::zero();
    for a in 0..n {
        for b in a + 1..n {
            sum = sum + dist.covariance(labels[a], labels[b])?.abs();
        }
    }
    Ok(sum / S::from_usize(n * (n - 1) / 2))
}

/// Lexicographic `k`-subsets of `0..n`.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Sum over `J` and pairs outside `J` of `Σ_y f(table_y)`, plus the number
/// of `(J, pair)` terms. Per-`J` sums run in parallel and are added in `J`
/// order.
fn triple_sum<S, T, F>(dist: &JointDistribution<S>, t: usize, zero: T, f: F) -> (T, usize)
where
    S: Scalar,
    T: Clone + Send + Sync + std::ops::Add<Output = T>,
    F: Fn(&PairTable<S>) -> T + Sync,
{
    let n = dist.labels().len();
    let sets = subsets(n, t);
    let per_set: Vec<T> = sets
        .par_iter()
        .map(|j| {
            let rest: Vec<usize> = (0..n).filter(|i| !j.contains(i)).collect();
            let mut acc = zero.clone();
            for (x, &a) in rest.iter().enumerate() {
                for &b in &rest[x + 1..] {
                    for table in dist.pair_tables_given(j, a, b) {
                        acc = acc + f(&table);
                    }
                }
            }
            acc
        })
        .collect();
    let pairs = (n - t) * (n - t - 1) / 2;
    let total = per_set.into_iter().fold(zero, |a, b| a + b);
    (total, sets.len() * pairs)
}

/// `avgCovCond_t`.
pub fn avg_cov_cond<S: Scalar>(dist: &JointDistribution<S>, t: usize) -> Result<S> {
    let n = require_pairs(dist)?;
    check_order(n, t)?;
    let (sum, count) = triple_sum(dist, t, S::zero(), |table| {
        // Pr[y]·|Cov| with Pr[y] the table mass
        table
            .covariance()
            .map(|c| table.total() * c.abs())
            .unwrap_or_else(S::zero)
    });
    Ok(sum / S::from_usize(count))
}

/// `I(X_u; X_v)` in nats.
pub fn mutual_information<S: Scalar>(
    dist: &JointDistribution<S>,
    u: VertexId,
    v: VertexId,
) -> Result<f64> {
    if u == v {
        return Err(Error::InvalidArgument(
            "mutual information needs two distinct variables".into(),
        ));
    }
    Ok(dist
        .pair_table(u, v)?
        .mutual_information()
        .expect("normalized table has positive mass"))
}

/// `avgInfoCond_t` in nats, evaluated in `f64`.
pub fn avg_info_cond<S: Scalar>(dist: &JointDistribution<S>, t: usize) -> Result<f64> {
    let n = require_pairs(dist)?;
    check_order(n, t)?;
    let (sum, count) = triple_sum(dist, t, 0.0f64, |table| {
        table
            .mutual_information()
            .map(|mi| table.total().to_f64() * mi)
            .unwrap_or(0.0)
    });
    Ok(sum / count as f64)
}

fn check_range(n: usize, range: &std::ops::RangeInclusive<usize>) -> Result<()> {
    require_n(n)?;
    check_order(n, *range.end())?;
    if range.is_empty() {
        return Err(Error::InvalidArgument("empty t range".into()));
    }
    Ok(())
}

fn require_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two variables required, found {n}"
        )));
    }
    Ok(())
}

pub fn avg_cov_cond_series<S: Scalar>(
    dist: &JointDistribution<S>,
    range: std::ops::RangeInclusive<usize>,
) -> Result<MetricSeries<S>> {
    let n = dist.labels().len();
    check_range(n, &range)?;
    Ok(MetricSeries {
        metric: "avgcovcond".into(),
        n,
        values: range
            .map(|t| Ok((t, avg_cov_cond(dist, t)?)))
            .collect::<Result<_>>()?,
    })
}

pub fn avg_info_cond_series<S: Scalar>(
    dist: &JointDistribution<S>,
    range: std::ops::RangeInclusive<usize>,
) -> Result<MetricSeries<f64>> {
    let n = dist.labels().len();
    check_range(n, &range)?;
    Ok(MetricSeries {
        metric: "avginfocond".into(),
        n,
        values: range
            .map(|t| Ok((t, avg_info_cond(dist, t)?)))
            .collect::<Result<_>>()?,
    })
}

/// Average over leaf pairs of `E|Cov[Y_u, Y_v]|` given all other leaves.
pub fn conjecture_b_lhs<S: Scalar>(tree: &InfoFlowTree<S>, caps: &Caps) -> Result<S> {
    let leaves = tree.leaves();
    let t = leaves.len();
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two leaves required, found {t}"
        )));
    }
    caps.check_leaves(t)?;
    let pairs: Vec<(VertexId, VertexId)> = (0..t)
        .flat_map(|a| (a + 1..t).map(move |b| (leaves[a], leaves[b])))
        .collect();
    let terms: Vec<S> = pairs
        .par_iter()
        .map(|&(u, v)| {
            let rest: Vec<VertexId> = leaves.iter().copied().filter(|&l| l != u && l != v).collect();
            Ok(expected_abs_cond_cov(tree, u, v, &rest, caps)?.expectation)
        })
        .collect::<Result<_>>()?;
    let count = terms.len();
    Ok(terms.into_iter().fold(S::zero(), |a, b| a + b) / S::from_usize(count))
}

/// `ρ² E[Var[X_0 | X_1, …, X_t]]` for a center with `t` leaves at
/// correlation `ρ`; this is the expected conditional covariance of two
/// further leaves.
///
/// With `a = (1+ρ)/2`, `b = (1-ρ)/2`, `A_k = a^k b^(t-k)` and
/// `B_k = a^(t-k) b^k`, the value is `ρ² Σ_k C(t,k) 2 A_k B_k / (A_k + B_k)`.
/// Exact scalars use that sum directly; `f64` evaluates it in log space so
/// that `t` can reach the thousands.
pub fn homogeneous_star_cond_variance<S: Scalar>(rho: &S, t: usize) -> Result<S> {
    let one = S::one();
    if *rho > one || *rho < -one {
        return Err(Error::CorrelationOutOfRange(rho.to_string()));
    }
    let rho2 = rho.clone() * rho.clone();
    if S::EXACT {
        let a = S::half() + S::half() * rho.clone();
        let b = S::half() - S::half() * rho.clone();
        let pow = |x: &S, k: usize| (0..k).fold(S::one(), |acc, _| acc * x.clone());
        let mut binom = S::one();
        let mut sum = S::zero();
        for k in 0..=t {
            let big_a = pow(&a, k) * pow(&b, t - k);
            let big_b = pow(&a, t - k) * pow(&b, k);
            let denom = big_a.clone() + big_b.clone();
            if !denom.is_zero() {
                sum = sum + binom.clone() * S::from_usize(2) * big_a * big_b / denom;
            }
            binom = binom * S::from_usize(t - k) / S::from_usize(k + 1);
        }
        Ok(rho2 * sum)
    } else {
        let r = rho.to_f64();
        let (ln_a, ln_b) = (((1.0 + r) / 2.0).ln(), ((1.0 - r) / 2.0).ln());
        // k·ln x with 0·ln 0 = 0
        let times = |k: usize, ln: f64| if k == 0 { 0.0 } else { k as f64 * ln };
        let mut ln_binom = 0.0f64;
        let mut sum = 0.0f64;
        for k in 0..=t {
            let la = times(k, ln_a) + times(t - k, ln_b);
            let lb = times(t - k, ln_a) + times(k, ln_b);
            let hi = la.max(lb);
            if hi > f64::NEG_INFINITY {
                let ln_sum = hi + ((la - hi).exp() + (lb - hi).exp()).ln();
                sum += 2.0 * (ln_binom + la + lb - ln_sum).exp();
            }
            ln_binom += ((t - k) as f64).ln() - ((k + 1) as f64).ln();
        }
        S::from_f64(rho2.to_f64() * sum)
    }
}
