//! Tree builders and seeded random tree families.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{Exact, Scalar};
use crate::tree::{InfoFlowTree, TreeSpec, VertexId};

/// Generator for one trial: the master seed picks the key, the trial index
/// picks the stream, so trials are independent of evaluation order.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `{k / denom : -denom ≤ k ≤ denom}`.
pub fn grid_rational<R: Rng + ?Sized>(rng: &mut R, denom: i64) -> Exact {
    Exact::from_ratio(rng.random_range(-denom..=denom), denom)
}

/// Uniform on `[-1, 1]`.
pub fn uniform_signed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..=1.0)
}

/// Uniform on `[0, 1]`.
pub fn uniform_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..=1.0)
}

fn build<S: Scalar>(edges: Vec<(u32, u32, S)>) -> InfoFlowTree<S> {
    InfoFlowTree::from_edges(edges).expect("generator emits valid trees")
}

/// Uniformly random labelled tree on `0..n` (Prüfer decoding) with edge
/// correlations drawn from `rho`.
pub fn random_tree<S, R, F>(rng: &mut R, n: usize, mut rho: F) -> Result<InfoFlowTree<S>>
where
    S: Scalar,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> S,
{
    if n < 2 {
        return Err(Error::InvalidArgument(format!("tree needs ≥ 2 vertices, got {n}")));
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut pairs = Vec::with_capacity(n - 1);
    for &c in &code {
        let leaf = (0..n).find(|&i| degree[i] == 1).expect("Prüfer invariant");
        pairs.push((leaf, c));
        degree[leaf] -= 1;
        degree[c] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    pairs.push((rest[0], rest[1]));
    let edges = pairs
        .into_iter()
        .map(|(a, b)| (a as u32, b as u32, rho(rng)))
        .collect();
    Ok(build(edges))
}

/// Spine `0..t`, leaf `t + i` hanging off spine vertex `i`.
pub fn simple_caterpillar<S: Scalar>(spine: Vec<S>, leaf: Vec<S>) -> Result<InfoFlowTree<S>> {
    let t = leaf.len();
    if t < 2 || spine.len() + 1 != t {
        return Err(Error::InvalidArgument(format!(
            "simple caterpillar needs t ≥ 2 leaf and t - 1 spine correlations, got {} and {}",
            t,
            spine.len()
        )));
    }
    let t32 = t as u32;
    let mut edges: Vec<(u32, u32, S)> = spine
        .into_iter()
        .enumerate()
        .map(|(i, r)| (i as u32, i as u32 + 1, r))
        .collect();
    edges.extend(
        leaf.into_iter()
            .enumerate()
            .map(|(i, r)| (i as u32, t32 + i as u32, r)),
    );
    InfoFlowTree::from_edges(edges)
}

/// Spine correlations uniform on `[0, 1]`, leaf correlations on `[-1, 1]`.
pub fn random_simple_caterpillar<R: Rng + ?Sized>(rng: &mut R, t: usize) -> Result<InfoFlowTree<f64>> {
    let spine = (1..t).map(|_| uniform_unit(rng)).collect();
    let leaf = (0..t).map(|_| uniform_signed(rng)).collect();
    simple_caterpillar(spine, leaf)
}

/// Center `0` with leaves `1..=m`.
pub fn star<S: Scalar>(rhos: Vec<S>) -> Result<InfoFlowTree<S>> {
    let m = rhos.len() as u32;
    if m == 0 {
        return Err(Error::InvalidArgument("star needs at least one leaf".into()));
    }
    let edges = rhos
        .into_iter()
        .enumerate()
        .map(|(i, r)| (VertexId(0), VertexId(i as u32 + 1), r))
        .collect();
    InfoFlowTree::new(TreeSpec {
        vertices: (0..=m).map(VertexId).collect(),
        edges,
        // a one-leaf star still has an internal center
        leaves: Some((1..=m).map(VertexId).collect()),
    })
}

/// Complete binary tree of the given depth in heap order, every edge `rho`.
pub fn complete_binary<S: Scalar>(depth: u32, rho: S) -> Result<InfoFlowTree<S>> {
    if depth == 0 || depth > 20 {
        return Err(Error::InvalidArgument(format!("depth {depth} outside 1..=20")));
    }
    let internal = (1u32 << depth) - 1;
    let edges = (0..internal)
        .flat_map(|p| [(p, 2 * p + 1, rho.clone()), (p, 2 * p + 2, rho.clone())])
        .collect();
    Ok(build(edges))
}

/// Caterpillar of depth two: each spine vertex carries direct leaves and/or
/// hair vertices that carry leaves. Exactly `t` leaves.
pub fn random_depth2_caterpillar<R: Rng + ?Sized>(rng: &mut R, t: usize) -> Result<InfoFlowTree<f64>> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!("need t ≥ 2 leaves, got {t}")));
    }
    let s = rng.random_range(1..=(t / 2).max(1));
    // (spine vertex, leaf count, through a hair vertex)
    let mut children: Vec<(u32, usize, bool)> = Vec::new();
    // every spine vertex needs a child, a lone spine vertex two
    let base = if s == 1 { 2 } else { s };
    for k in 0..base {
        children.push(((k % s) as u32, 1, rng.random_bool(0.5)));
    }
    for _ in base..t {
        let hairs: Vec<usize> = (0..children.len()).filter(|&i| children[i].2).collect();
        match hairs.choose(rng) {
            Some(&h) if rng.random_bool(0.5) => children[h].1 += 1,
            _ => children.push((rng.random_range(0..s as u32), 1, rng.random_bool(0.5))),
        }
    }
    let mut edges: Vec<(u32, u32, f64)> = (1..s as u32)
        .map(|i| (i - 1, i, uniform_unit(rng)))
        .collect();
    let mut next = s as u32;
    for (spine, count, hair) in children {
        if hair {
            let h = next;
            edges.push((spine, h, uniform_signed(rng)));
            next += 1;
            for _ in 0..count {
                edges.push((h, next, uniform_signed(rng)));
                next += 1;
            }
        } else {
            edges.push((spine, next, uniform_signed(rng)));
            next += 1;
        }
    }
    Ok(build(edges))
}
