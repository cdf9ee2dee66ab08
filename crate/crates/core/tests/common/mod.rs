//! Shared generators for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ift_core::transforms::Rewrite;
use ift_core::{Exact, InfoFlowTree, Scalar, VertexId};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn r(n: i64, d: i64) -> Exact {
    Exact::from_ratio(n, d)
}

pub fn v(x: u32) -> VertexId {
    VertexId(x)
}

/// Uniform on `{k/8 : -8 ≤ k ≤ 8}`.
pub fn grid8<R: Rng + ?Sized>(rng: &mut R) -> Exact {
    ift_core::generate::grid_rational(rng, 8)
}

/// Random labelled tree on `2..=max_vertices` vertices with `k/8` correlations.
pub fn grid_tree<R: Rng + ?Sized>(rng: &mut R, max_vertices: usize) -> InfoFlowTree<Exact> {
    let n = rng.random_range(2..=max_vertices);
    ift_core::generate::random_tree(rng, n, |r| grid8(r)).unwrap()
}

/// A rewrite that applies to `tree`. Split-edge always applies, so the
/// choice never fails.
pub fn random_rewrite<R: Rng + ?Sized>(rng: &mut R, tree: &InfoFlowTree<Exact>) -> Rewrite<Exact> {
    let internal: Vec<VertexId> = tree.internal_vertices().collect();
    let mut options: Vec<Rewrite<Exact>> = Vec::new();
    for &w in &internal {
        let degree = tree.degree(w).unwrap();
        options.push(Rewrite::NegateInternalVertex { vertex: w });
        match degree {
            1 => options.push(Rewrite::PruneHiddenPendant { vertex: w }),
            2 => options.push(Rewrite::MergeDegree2 { vertex: w }),
            _ => {}
        }
        let m = rng.random_range(1..=degree.max(2));
        let attachment: BTreeMap<VertexId, usize> = tree
            .neighbors(w)
            .unwrap()
            .into_iter()
            .map(|(u, _)| (u, rng.random_range(1..=m)))
            .collect();
        options.push(Rewrite::SplitVertex {
            vertex: w,
            m,
            attachment,
        });
    }
    for e in tree.edges() {
        if *e.rho.value() == Exact::from_ratio(1, 1)
            && internal.contains(&e.u)
            && internal.contains(&e.v)
        {
            options.push(Rewrite::ContractUnitSubgraph {
                vertices: vec![e.u, e.v],
            });
        }
    }
    // keep split-edge at a fixed share so the other rules get exercised
    if options.is_empty() || rng.random_bool(0.3) {
        let e = tree.edges().choose(rng).unwrap();
        let rho = e.rho.value().clone();
        let (rho1, rho2) = split_factors(rng, &rho);
        let (u, w) = if rng.random_bool(0.5) { (e.u, e.v) } else { (e.v, e.u) };
        return Rewrite::SplitEdge { u, v: w, rho1, rho2 };
    }
    options.choose(rng).unwrap().clone()
}

/// `(a, b)` in `[-1, 1]²` with `a b = rho`.
fn split_factors<R: Rng + ?Sized>(rng: &mut R, rho: &Exact) -> (Exact, Exact) {
    use num::{Signed, Zero};
    let one = Exact::from_ratio(1, 1);
    if rho.is_zero() {
        let a = grid8(rng);
        return if rng.random_bool(0.5) { (a, Exact::zero()) } else { (Exact::zero(), a) };
    }
    // a on the grid with |a| ≥ |rho|, then b = rho / a
    let candidates: Vec<Exact> = (-8..=8)
        .map(|k| Exact::from_ratio(k, 8))
        .filter(|a| !a.is_zero() && a.abs() >= rho.abs())
        .collect();
    let a = candidates.choose(rng).cloned().unwrap_or(one);
    let b = rho / &a;
    (a, b)
}
