//! Leaf-law preserving rewrites of information flow trees.
//!
//! The primitives are sign pushing at an internal vertex, merging and
//! splitting a degree-2 path, contracting a connected block of unit edges,
//! splitting a vertex into a unit path and pruning a hidden pendant vertex.
//! [`to_binary`] and [`to_simple_caterpillar`] compose them and return a
//! [`TransformTrace`] that replays to the same output.
//!
//! Fresh vertices always get id `max id + 1`, so a trace replayed on the
//! same input allocates the same ids.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde_json::{json, Value};

use crate::distribution::Caps;
use crate::error::{Error, Result};
use crate::inference::leaf_distribution;
use crate::scalar::{Scalar, DEFAULT_TOLERANCE};
use crate::tree::{Correlation, InfoFlowTree, VertexId};

type EdgeList<S> = Vec<(VertexId, VertexId, S)>;

fn parts<S: Scalar>(tree: &InfoFlowTree<S>) -> (Vec<VertexId>, EdgeList<S>) {
    let spec = tree.to_spec();
    (spec.vertices, spec.edges)
}

fn fresh_id(tree_max: VertexId, offset: u32) -> Result<VertexId> {
    tree_max
        .0
        .checked_add(offset)
        .map(VertexId)
        .ok_or_else(|| Error::InvalidArgument("vertex id space exhausted".into()))
}

fn require_internal<S: Scalar>(tree: &InfoFlowTree<S>, v: VertexId) -> Result<()> {
    tree.index_of(v)?;
    if tree.is_leaf(v) {
        return Err(Error::IsLeaf(v));
    }
    Ok(())
}

/// Flips the sign of every edge at the internal vertex `w`.
pub fn negate_internal_vertex<S: Scalar>(
    tree: &InfoFlowTree<S>,
    w: VertexId,
) -> Result<InfoFlowTree<S>> {
    require_internal(tree, w)?;
    let (vertices, mut edges) = parts(tree);
    for (u, v, rho) in &mut edges {
        if *u == w || *v == w {
            *rho = -rho.clone();
        }
    }
    tree.rebuild(vertices, edges)
}

/// Top-down from the lowest-id root: every non-leaf whose parent edge is
/// negative gets [`negate_internal_vertex`]. Afterwards no edge between two
/// internal vertices is negative.
pub fn normalize_internal_signs<S: Scalar>(
    tree: &InfoFlowTree<S>,
) -> Result<(InfoFlowTree<S>, TransformTrace<S>)> {
    let mut trace = TransformTrace::new();
    let mut current = tree.clone();
    let root = tree.index_of(tree.root())?;
    // BFS order is by distance, and negating w only touches edges to w's
    // children, which are visited later.
    for (i, parent) in tree.bfs_from(root) {
        let Some((p, _)) = parent else { continue };
        let w = tree.vertices()[i];
        if tree.is_leaf(w) {
            continue;
        }
        let rho = current
            .edge_between(w, tree.vertices()[p])?
            .rho
            .value()
            .clone();
        if rho.is_negative() {
            current = trace.apply(&current, Rewrite::NegateInternalVertex { vertex: w })?;
        }
    }
    Ok((current, trace))
}

/// Replaces the path `x - v - y` through the degree-2 internal vertex `v`
/// by one edge with the product correlation.
pub fn merge_degree2<S: Scalar>(tree: &InfoFlowTree<S>, v: VertexId) -> Result<InfoFlowTree<S>> {
    require_internal(tree, v)?;
    let degree = tree.degree(v)?;
    if degree != 2 {
        return Err(Error::WrongDegree {
            vertex: v,
            degree,
            expected: 2,
        });
    }
    let (mut vertices, edges) = parts(tree);
    vertices.retain(|&x| x != v);
    let mut ends = Vec::new();
    let mut product = S::one();
    let mut slot = None;
    let mut kept = Vec::with_capacity(edges.len() - 1);
    for (k, (a, b, rho)) in edges.into_iter().enumerate() {
        if a == v || b == v {
            ends.push(if a == v { b } else { a });
            product = product * rho;
            slot.get_or_insert(k);
        } else {
            kept.push((a, b, rho));
        }
    }
    kept.insert(slot.expect("degree 2"), (ends[0], ends[1], product));
    tree.rebuild(vertices, kept)
}

/// Inserts a fresh vertex `w` on edge `(u, v)` with `ρ(u,w) = rho1` and
/// `ρ(w,v) = rho2`. The product must equal `ρ(u,v)` (exactly, or within
/// `tol` in float mode). Returns the tree and `w`.
pub fn split_edge<S: Scalar>(
    tree: &InfoFlowTree<S>,
    u: VertexId,
    v: VertexId,
    rho1: S,
    rho2: S,
    tol: f64,
) -> Result<(InfoFlowTree<S>, VertexId)> {
    let k = tree.edge_index(u, v)?;
    let rho1 = Correlation::new(rho1)?.into_inner();
    let rho2 = Correlation::new(rho2)?.into_inner();
    let expected = tree.edges()[k].rho.value().clone();
    let product = rho1.clone() * rho2.clone();
    if !product.approx_eq(&expected, tol) {
        return Err(Error::ProductMismatch {
            product: product.to_string(),
            expected: expected.to_string(),
        });
    }
    let w = fresh_id(tree.max_id(), 1)?;
    let (mut vertices, mut edges) = parts(tree);
    vertices.push(w);
    edges[k] = (u, w, rho1);
    edges.insert(k + 1, (w, v, rho2));
    Ok((tree.rebuild(vertices, edges)?, w))
}

/// Contracts a connected set of internal vertices joined by `ρ = 1` edges
/// into its smallest id.
pub fn contract_unit_subgraph<S: Scalar>(
    tree: &InfoFlowTree<S>,
    set: &[VertexId],
) -> Result<InfoFlowTree<S>> {
    let members: BTreeSet<VertexId> = set.iter().copied().collect();
    let Some(&keep) = members.first() else {
        return Err(Error::InvalidArgument("empty vertex set".into()));
    };
    for &x in &members {
        require_internal(tree, x)?;
    }
    let inside = |e: &(VertexId, VertexId, S)| members.contains(&e.0) && members.contains(&e.1);
    let (vertices, edges) = parts(tree);
    let mut reached = HashSet::from([keep]);
    let mut stack = vec![keep];
    while let Some(x) = stack.pop() {
        for (a, b, rho) in edges.iter().filter(|e| inside(e)) {
            if *a != x && *b != x {
                continue;
            }
            if !rho.is_one() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) inside the set has correlation {rho}, not 1"
                )));
            }
            let y = if *a == x { *b } else { *a };
            if reached.insert(y) {
                stack.push(y);
            }
        }
    }
    if reached.len() != members.len() {
        return Err(Error::InvalidArgument(
            "vertex set does not induce a connected subgraph".into(),
        ));
    }
    let rename = |x: VertexId| if members.contains(&x) { keep } else { x };
    let vertices = vertices
        .into_iter()
        .filter(|x| !members.contains(x) || *x == keep)
        .collect();
    let edges = edges
        .into_iter()
        .filter(|e| !inside(e))
        .map(|(a, b, rho)| (rename(a), rename(b), rho))
        .collect();
    tree.rebuild(vertices, edges)
}

/// Replaces internal `v` by a unit-correlation path `w_1, …, w_m` and moves
/// each edge `(u, v)` to `(u, w_i)` with `i = attachment[u]` (1-based).
/// `w_1` keeps the id of `v`; `w_2, …` are fresh.
pub fn split_vertex<S: Scalar>(
    tree: &InfoFlowTree<S>,
    v: VertexId,
    m: usize,
    attachment: &BTreeMap<VertexId, usize>,
) -> Result<InfoFlowTree<S>> {
    require_internal(tree, v)?;
    if m == 0 {
        return Err(Error::InvalidArgument("path length m must be positive".into()));
    }
    let neighbours: BTreeSet<VertexId> = tree.neighbors(v)?.into_iter().map(|(u, _)| u).collect();
    let keys: BTreeSet<VertexId> = attachment.keys().copied().collect();
    if keys != neighbours {
        return Err(Error::InvalidArgument(format!(
            "attachment must map exactly the neighbours of {v}"
        )));
    }
    if let Some((u, &i)) = attachment.iter().find(|(_, &i)| i == 0 || i > m) {
        return Err(Error::InvalidArgument(format!(
            "neighbour {u} attached at position {i}, outside 1..={m}"
        )));
    }
    let path: Vec<VertexId> = std::iter::once(Ok(v))
        .chain((1..m as u32).map(|k| fresh_id(tree.max_id(), k)))
        .collect::<Result<_>>()?;
    let (mut vertices, mut edges) = parts(tree);
    vertices.extend_from_slice(&path[1..]);
    for (a, b, _) in &mut edges {
        if *a == v {
            *a = path[attachment[b] - 1];
        } else if *b == v {
            *b = path[attachment[a] - 1];
        }
    }
    edges.extend(path.windows(2).map(|w| (w[0], w[1], S::one())));
    tree.rebuild(vertices, edges)
}

/// Removes a degree-1 vertex that is not designated a leaf. Its variable is
/// unobserved and has no descendants, so marginalizing it is free.
pub fn prune_hidden_pendant<S: Scalar>(
    tree: &InfoFlowTree<S>,
    v: VertexId,
) -> Result<InfoFlowTree<S>> {
    require_internal(tree, v)?;
    let degree = tree.degree(v)?;
    if degree != 1 {
        return Err(Error::WrongDegree {
            vertex: v,
            degree,
            expected: 1,
        });
    }
    let (mut vertices, mut edges) = parts(tree);
    vertices.retain(|&x| x != v);
    edges.retain(|(a, b, _)| *a != v && *b != v);
    tree.rebuild(vertices, edges)
}

/// One replayable rewrite.
#[derive(Debug, Clone, PartialEq)]
pub enum Rewrite<S> {
    NegateInternalVertex {
        vertex: VertexId,
    },
    MergeDegree2 {
        vertex: VertexId,
    },
    SplitEdge {
        u: VertexId,
        v: VertexId,
        rho1: S,
        rho2: S,
    },
    ContractUnitSubgraph {
        vertices: Vec<VertexId>,
    },
    SplitVertex {
        vertex: VertexId,
        m: usize,
        attachment: BTreeMap<VertexId, usize>,
    },
    PruneHiddenPendant {
        vertex: VertexId,
    },
}

impl<S: Scalar> Rewrite<S> {
    pub fn rule(&self) -> &'static str {
        match self {
            Rewrite::NegateInternalVertex { .. } => "negate-internal-vertex",
            Rewrite::MergeDegree2 { .. } => "merge-degree2",
            Rewrite::SplitEdge { .. } => "split-edge",
            Rewrite::ContractUnitSubgraph { .. } => "contract-unit-subgraph",
            Rewrite::SplitVertex { .. } => "split-vertex",
            Rewrite::PruneHiddenPendant { .. } => "prune-hidden-pendant",
        }
    }

    pub fn apply(&self, tree: &InfoFlowTree<S>) -> Result<InfoFlowTree<S>> {
        match self {
            Rewrite::NegateInternalVertex { vertex } => negate_internal_vertex(tree, *vertex),
            Rewrite::MergeDegree2 { vertex } => merge_degree2(tree, *vertex),
            Rewrite::SplitEdge { u, v, rho1, rho2 } => {
                split_edge(tree, *u, *v, rho1.clone(), rho2.clone(), DEFAULT_TOLERANCE)
                    .map(|(t, _)| t)
            }
            Rewrite::ContractUnitSubgraph { vertices } => contract_unit_subgraph(tree, vertices),
            Rewrite::SplitVertex {
                vertex,
                m,
                attachment,
            } => split_vertex(tree, *vertex, *m, attachment),
            Rewrite::PruneHiddenPendant { vertex } => prune_hidden_pendant(tree, *vertex),
        }
    }

    fn params_json(&self) -> Value {
        match self {
            Rewrite::NegateInternalVertex { vertex }
            | Rewrite::MergeDegree2 { vertex }
            | Rewrite::PruneHiddenPendant { vertex } => json!({ "vertex": vertex }),
            Rewrite::SplitEdge { u, v, rho1, rho2 } => json!({
                "u": u, "v": v, "rho1": rho1.to_json(), "rho2": rho2.to_json()
            }),
            Rewrite::ContractUnitSubgraph { vertices } => json!({ "vertices": vertices }),
            Rewrite::SplitVertex {
                vertex,
                m,
                attachment,
            } => json!({
                "vertex": vertex,
                "m": m,
                "attachment": attachment.iter().map(|(u, i)| json!([u, i])).collect::<Vec<_>>(),
            }),
        }
    }

    fn from_json(rule: &str, p: &Value) -> Result<Self> {
        let vid = |key: &str| -> Result<VertexId> {
            p.get(key)
                .and_then(Value::as_u64)
                .and_then(|x| u32::try_from(x).ok())
                .map(VertexId)
                .ok_or_else(|| Error::Parse(format!("{rule}: missing vertex field {key:?}")))
        };
        let scalar = |key: &str| -> Result<S> {
            S::from_json(
                p.get(key)
                    .ok_or_else(|| Error::Parse(format!("{rule}: missing field {key:?}")))?,
            )
        };
        Ok(match rule {
            "negate-internal-vertex" => Rewrite::NegateInternalVertex {
                vertex: vid("vertex")?,
            },
            "merge-degree2" => Rewrite::MergeDegree2 {
                vertex: vid("vertex")?,
            },
            "prune-hidden-pendant" => Rewrite::PruneHiddenPendant {
                vertex: vid("vertex")?,
            },
            "split-edge" => Rewrite::SplitEdge {
                u: vid("u")?,
                v: vid("v")?,
                rho1: scalar("rho1")?,
                rho2: scalar("rho2")?,
            },
            "contract-unit-subgraph" => Rewrite::ContractUnitSubgraph {
                vertices: serde_json::from_value(p.get("vertices").cloned().unwrap_or(Value::Null))?,
            },
            "split-vertex" => {
                let pairs: Vec<(VertexId, usize)> =
                    serde_json::from_value(p.get("attachment").cloned().unwrap_or(Value::Null))?;
                Rewrite::SplitVertex {
                    vertex: vid("vertex")?,
                    m: p.get("m")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| Error::Parse("split-vertex: missing m".into()))?
                        as usize,
                    attachment: pairs.into_iter().collect(),
                }
            }
            other => return Err(Error::Parse(format!("unknown rule {other:?}"))),
        })
    }
}

/// A rewrite together with the edges it removed and the edges it created.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<S> {
    pub rewrite: Rewrite<S>,
    pub before: EdgeList<S>,
    pub after: EdgeList<S>,
}

/// Ordered log of rewrites; replaying it on the input reproduces the output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformTrace<S> {
    pub steps: Vec<TraceStep<S>>,
}

impl<S: Scalar> TransformTrace<S> {
    pub fn new() -> Self {
        TransformTrace { steps: Vec::new() }
    }

    /// Applies `rewrite` to `tree` and records it.
    pub fn apply(&mut self, tree: &InfoFlowTree<S>, rewrite: Rewrite<S>) -> Result<InfoFlowTree<S>> {
        let out = rewrite.apply(tree)?;
        self.record(tree, rewrite, &out);
        Ok(out)
    }

    /// Records a rewrite already applied elsewhere, e.g. with a custom
    /// tolerance.
    pub fn record(&mut self, before: &InfoFlowTree<S>, rewrite: Rewrite<S>, after: &InfoFlowTree<S>) {
        let (removed, added) = edge_diff(before, after);
        self.steps.push(TraceStep {
            rewrite,
            before: removed,
            after: added,
        });
    }

    pub fn extend(&mut self, other: TransformTrace<S>) {
        self.steps.extend(other.steps);
    }

    pub fn replay(&self, tree: &InfoFlowTree<S>) -> Result<InfoFlowTree<S>> {
        self.steps
            .iter()
            .try_fold(tree.clone(), |t, step| step.rewrite.apply(&t))
    }

    pub fn to_json(&self) -> Value {
        let edges = |list: &EdgeList<S>| -> Value {
            list.iter()
                .map(|(u, v, r)| json!([u, v, r.to_json()]))
                .collect()
        };
        json!({
            "steps": self.steps.iter().map(|s| json!({
                "rule": s.rewrite.rule(),
                "params": s.rewrite.params_json(),
                "before": edges(&s.before),
                "after": edges(&s.after),
            })).collect::<Vec<_>>()
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("trace: {what}"));
        let edges = |v: Option<&Value>| -> Result<EdgeList<S>> {
            v.and_then(Value::as_array)
                .ok_or_else(|| bad("missing edge list"))?
                .iter()
                .map(|e| {
                    let triple = e.as_array().filter(|a| a.len() == 3).ok_or_else(|| bad("edge"))?;
                    let id = |x: &Value| -> Result<VertexId> {
                        x.as_u64()
                            .and_then(|x| u32::try_from(x).ok())
                            .map(VertexId)
                            .ok_or_else(|| bad("vertex id"))
                    };
                    Ok((id(&triple[0])?, id(&triple[1])?, S::from_json(&triple[2])?))
                })
                .collect()
        };
        let steps = value
            .get("steps")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing steps"))?
            .iter()
            .map(|s| {
                let rule = s.get("rule").and_then(Value::as_str).ok_or_else(|| bad("rule"))?;
                let params = s.get("params").cloned().unwrap_or(Value::Null);
                Ok(TraceStep {
                    rewrite: Rewrite::from_json(rule, &params)?,
                    before: edges(s.get("before"))?,
                    after: edges(s.get("after"))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(TransformTrace { steps })
    }
}

/// Edges of `a` missing from `b`, and edges of `b` missing from `a`.
fn edge_diff<S: Scalar>(a: &InfoFlowTree<S>, b: &InfoFlowTree<S>) -> (EdgeList<S>, EdgeList<S>) {
    let list = |t: &InfoFlowTree<S>| -> EdgeList<S> {
        t.edges()
            .iter()
            .map(|e| (e.key().0, e.key().1, e.rho.value().clone()))
            .collect()
    };
    let (ea, eb) = (list(a), list(b));
    let only = |x: &EdgeList<S>, y: &EdgeList<S>| -> EdgeList<S> {
        x.iter().filter(|e| !y.contains(e)).cloned().collect()
    };
    (only(&ea, &eb), only(&eb, &ea))
}

fn prune_all_hidden_pendants<S: Scalar>(
    mut tree: InfoFlowTree<S>,
    trace: &mut TransformTrace<S>,
) -> Result<InfoFlowTree<S>> {
    loop {
        let pendant = tree
            .internal_vertices()
            .find(|&v| tree.degree(v).ok() == Some(1));
        match pendant {
            Some(v) if tree.num_vertices() > 2 => {
                tree = trace.apply(&tree, Rewrite::PruneHiddenPendant { vertex: v })?;
            }
            _ => return Ok(tree),
        }
    }
}

fn require_two_leaves<S>(tree: &InfoFlowTree<S>) -> Result<()> {
    if tree.leaves().len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least two leaves required, found {}",
            tree.leaves().len()
        )));
    }
    Ok(())
}

/// Equivalent rooted binary tree. Returns the tree, its root and the trace.
///
/// Vertices of degree `d > 3` are split with `m = d` (neighbours in id
/// order, one per path vertex); the edge with the smallest `(min, max)`
/// endpoints is split with factors `(ρ(e), 1)` to create the root; then
/// every non-root degree-2 vertex is merged away.
pub fn to_binary<S: Scalar>(
    tree: &InfoFlowTree<S>,
) -> Result<(InfoFlowTree<S>, VertexId, TransformTrace<S>)> {
    require_two_leaves(tree)?;
    let mut trace = TransformTrace::new();
    let mut t = prune_all_hidden_pendants(tree.clone(), &mut trace)?;

    let high: Vec<VertexId> = t
        .vertices()
        .iter()
        .copied()
        .filter(|&v| t.degree(v).is_ok_and(|d| d > 3))
        .collect();
    for v in high {
        let neighbours: BTreeSet<VertexId> = t.neighbors(v)?.into_iter().map(|(u, _)| u).collect();
        let attachment = neighbours.iter().enumerate().map(|(i, &u)| (u, i + 1)).collect();
        t = trace.apply(
            &t,
            Rewrite::SplitVertex {
                vertex: v,
                m: neighbours.len(),
                attachment,
            },
        )?;
    }

    let (u, v, rho) = t
        .edges()
        .iter()
        .map(|e| (e.key().0, e.key().1, e.rho.value().clone()))
        .min_by_key(|e| (e.0, e.1))
        .expect("tree has edges");
    let root = fresh_id(t.max_id(), 1)?;
    t = trace.apply(
        &t,
        Rewrite::SplitEdge {
            u,
            v,
            rho1: rho,
            rho2: S::one(),
        },
    )?;

    loop {
        let next = t
            .internal_vertices()
            .find(|&x| x != root && t.degree(x).ok() == Some(2));
        match next {
            Some(x) => t = trace.apply(&t, Rewrite::MergeDegree2 { vertex: x })?,
            None => break,
        }
    }
    Ok((t, root, trace))
}

/// Every internal vertex has exactly two children when hanging from `root`.
pub fn is_rooted_binary<S>(tree: &InfoFlowTree<S>, root: VertexId) -> bool {
    let Ok(r) = tree.index_of(root) else {
        return false;
    };
    tree.bfs_from(r).into_iter().all(|(i, parent)| {
        let children = tree.adjacency_at(i).len() - usize::from(parent.is_some());
        children == if tree.is_leaf_at(i) { 0 } else { 2 }
    })
}

/// Spine of a caterpillar: the non-leaf vertices, which must form a path,
/// listed from the endpoint with the smaller id. Empty when every vertex is
/// a leaf (the two-vertex tree).
pub fn caterpillar_spine<S>(tree: &InfoFlowTree<S>) -> Result<Vec<VertexId>> {
    let spine: BTreeSet<VertexId> = tree.internal_vertices().collect();
    let spine_neighbours = |v: VertexId| -> Result<Vec<VertexId>> {
        Ok(tree
            .neighbors(v)?
            .into_iter()
            .map(|(u, _)| u)
            .filter(|u| spine.contains(u))
            .collect())
    };
    let mut endpoints = Vec::new();
    for &v in &spine {
        match spine_neighbours(v)?.len() {
            0 | 1 => endpoints.push(v),
            2 => {}
            _ => return Err(Error::NotACaterpillar),
        }
    }
    let Some(&start) = endpoints.first() else {
        return if spine.is_empty() {
            Ok(Vec::new())
        } else {
            Err(Error::NotACaterpillar)
        };
    };
    let mut order = vec![start];
    let mut prev = None;
    let mut cur = start;
    loop {
        let next = spine_neighbours(cur)?
            .into_iter()
            .find(|&u| Some(u) != prev);
        match next {
            Some(n) => {
                prev = Some(cur);
                cur = n;
                order.push(n);
            }
            None => break,
        }
    }
    if order.len() != spine.len() {
        return Err(Error::NotACaterpillar);
    }
    Ok(order)
}

fn leaf_neighbours<S>(tree: &InfoFlowTree<S>, v: VertexId) -> Result<Vec<VertexId>> {
    let mut out: Vec<VertexId> = tree
        .neighbors(v)?
        .into_iter()
        .map(|(u, _)| u)
        .filter(|&u| tree.is_leaf(u))
        .collect();
    out.sort();
    Ok(out)
}

/// Spine of at least two vertices, each with exactly one leaf neighbour.
pub fn is_simple_caterpillar<S>(tree: &InfoFlowTree<S>) -> bool {
    match caterpillar_spine(tree) {
        Ok(spine) if spine.len() >= 2 => {
            spine.len() == tree.leaves().len()
                && spine
                    .iter()
                    .all(|&v| leaf_neighbours(tree, v).is_ok_and(|l| l.len() == 1))
        }
        _ => false,
    }
}

/// Equivalent simple caterpillar.
///
/// Hidden pendants are pruned, leafless spine vertices merged and each spine
/// vertex with `c ≥ 2` leaves split into a unit path of length `c` with the
/// previous spine neighbour at the first position and the next one at the
/// last. A two-vertex input first gets an internal vertex via
/// [`split_edge`] with factors `(ρ, 1)`.
pub fn to_simple_caterpillar<S: Scalar>(
    tree: &InfoFlowTree<S>,
) -> Result<(InfoFlowTree<S>, TransformTrace<S>)> {
    caterpillar_spine(tree)?;
    require_two_leaves(tree)?;
    let mut trace = TransformTrace::new();
    let mut t = prune_all_hidden_pendants(tree.clone(), &mut trace)?;

    if t.internal_vertices().next().is_none() {
        let e = &t.edges()[0];
        let (u, v, rho) = (e.key().0, e.key().1, e.rho.value().clone());
        t = trace.apply(
            &t,
            Rewrite::SplitEdge {
                u,
                v,
                rho1: rho,
                rho2: S::one(),
            },
        )?;
    }

    let spine = caterpillar_spine(&t)?;
    for (i, &s) in spine.iter().enumerate() {
        let leaves = leaf_neighbours(&t, s)?;
        // the later spine is untouched so far; the earlier side may have
        // been merged or split, so look the predecessor up in the current tree
        let next = spine.get(i + 1).copied();
        let prev = t
            .neighbors(s)?
            .into_iter()
            .map(|(u, _)| u)
            .find(|&u| !t.is_leaf(u) && Some(u) != next);
        match leaves.len() {
            0 => t = trace.apply(&t, Rewrite::MergeDegree2 { vertex: s })?,
            1 => {}
            c => {
                let mut attachment: BTreeMap<VertexId, usize> =
                    leaves.iter().enumerate().map(|(k, &l)| (l, k + 1)).collect();
                attachment.extend(prev.map(|p| (p, 1)));
                attachment.extend(next.map(|n| (n, c)));
                t = trace.apply(
                    &t,
                    Rewrite::SplitVertex {
                        vertex: s,
                        m: c,
                        attachment,
                    },
                )?;
            }
        }
    }
    Ok((t, trace))
}

/// Same leaf set and the same leaf law (exact, or entrywise within `tol`).
pub fn check_equivalence<S: Scalar>(
    t1: &InfoFlowTree<S>,
    t2: &InfoFlowTree<S>,
    caps: &Caps,
    tol: f64,
) -> Result<bool> {
    let l1: BTreeSet<VertexId> = t1.leaves().iter().copied().collect();
    let l2: BTreeSet<VertexId> = t2.leaves().iter().copied().collect();
    if l1 != l2 {
        return Err(Error::LabelMismatch);
    }
    leaf_distribution(t1, caps)?.approx_eq(&leaf_distribution(t2, caps)?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn r(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    fn v(x: u32) -> VertexId {
        VertexId(x)
    }

    fn equivalent(a: &InfoFlowTree<Exact>, b: &InfoFlowTree<Exact>) -> bool {
        check_equivalence(a, b, &Caps::default(), 0.0).unwrap()
    }

    fn rho(t: &InfoFlowTree<Exact>, a: u32, b: u32) -> Exact {
        t.edge_between(v(a), v(b)).unwrap().rho.value().clone()
    }

    #[test]
    fn negation_keeps_leaf_covariance() {
        let t = InfoFlowTree::from_edges(vec![(0, 1, r(1, 2)), (1, 2, r(1, 3))]).unwrap();
        let n = negate_internal_vertex(&t, v(1)).unwrap();
        assert_eq!(rho(&n, 0, 1), r(-1, 2));
        assert_eq!(rho(&n, 1, 2), r(-1, 3));
        assert!(equivalent(&t, &n));
        assert!(matches!(negate_internal_vertex(&t, v(0)), Err(Error::IsLeaf(_))));
    }

    #[test]
    fn normalize_fixes_negative_spine() {
        let t = InfoFlowTree::from_edges(vec![
            (0, 1, r(1, 2)),
            (1, 2, r(-1, 2)),
            (2, 3, r(-1, 3)),
            (1, 4, r(1, 4)),
            (2, 5, r(3, 4)),
            (3, 6, r(-1, 5)),
        ])
        .unwrap();
        let (n, trace) = normalize_internal_signs(&t).unwrap();
        assert_eq!(rho(&n, 1, 2), r(1, 2));
        assert_eq!(rho(&n, 2, 3), r(1, 3));
        assert!(equivalent(&t, &n));
        assert_eq!(trace.replay(&t).unwrap().to_spec(), n.to_spec());
        let (again, trace) = normalize_internal_signs(&n).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(again.to_spec(), n.to_spec());
    }

    #[test]
    fn merge_and_split_are_inverse_shapes() {
        let t = InfoFlowTree::from_edges(vec![(0, 1, r(1, 2)), (1, 2, r(1, 3))]).unwrap();
        let m = merge_degree2(&t, v(1)).unwrap();
        assert_eq!(rho(&m, 0, 2), r(1, 6));
        assert!(equivalent(&t, &m));
        let (s, w) = split_edge(&m, v(0), v(2), r(1, 2), r(1, 3), 0.0).unwrap();
        assert_eq!(w, v(3));
        assert!(equivalent(&s, &t));
        assert!(matches!(
            split_edge(&m, v(0), v(2), r(1, 2), r(1, 2), 0.0),
            Err(Error::ProductMismatch { .. })
        ));
    }

    #[test]
    fn merge_with_unit_factor() {
        let t = InfoFlowTree::from_edges(vec![(0, 1, r(1, 1)), (1, 2, r(2, 7))]).unwrap();
        assert_eq!(rho(&merge_degree2(&t, v(1)).unwrap(), 0, 2), r(2, 7));
    }

    #[test]
    fn contraction_of_unit_spine() {
        let t = InfoFlowTree::from_edges(vec![
            (0, 1, r(1, 1)),
            (1, 2, r(1, 1)),
            (0, 3, r(1, 2)),
            (1, 4, r(1, 3)),
            (2, 5, r(1, 4)),
        ])
        .unwrap();
        let c = contract_unit_subgraph(&t, &[v(0), v(1), v(2)]).unwrap();
        assert_eq!(c.num_vertices(), 4);
        assert_eq!(c.degree(v(0)).unwrap(), 3);
        assert!(equivalent(&t, &c));
        let same = contract_unit_subgraph(&t, &[v(1)]).unwrap();
        assert_eq!(same.to_spec(), t.to_spec());
        assert!(contract_unit_subgraph(&t, &[v(0), v(3)]).is_err());
        assert!(contract_unit_subgraph(&t, &[v(0), v(2)]).is_err());
    }

    #[test]
    fn vertex_split_lowers_degree() {
        let t = InfoFlowTree::from_edges(
            (1..=5).map(|i| (0, i, r(i as i64, 6))).collect(),
        )
        .unwrap();
        let attachment = (1..=5).map(|i| (v(i), i as usize)).collect();
        let s = split_vertex(&t, v(0), 5, &attachment).unwrap();
        assert!(s.vertices().iter().all(|&x| s.degree(x).unwrap() <= 3));
        assert!(equivalent(&t, &s));
        let one = (1..=5).map(|i| (v(i), 1)).collect();
        assert_eq!(split_vertex(&t, v(0), 1, &one).unwrap().to_spec(), t.to_spec());
        assert!(split_vertex(&t, v(1), 2, &BTreeMap::from([(v(0), 1)])).is_err());
    }

    #[test]
    fn star_to_binary() {
        let t = InfoFlowTree::from_edges(
            (1..=6).map(|i| (0, i, r(1, i as i64 + 1))).collect(),
        )
        .unwrap();
        let (b, root, trace) = to_binary(&t).unwrap();
        assert!(is_rooted_binary(&b, root));
        assert_eq!(b.internal_vertices().count(), 5);
        assert!(equivalent(&t, &b));
        assert_eq!(trace.replay(&t).unwrap().to_spec(), b.to_spec());
    }

    #[test]
    fn figure_caterpillar_simplifies() {
        let counts = [2, 1, 3, 2, 1, 4, 1];
        let mut edges = Vec::new();
        let mut next = 7;
        for (s, &c) in counts.iter().enumerate() {
            if s > 0 {
                edges.push((s as u32 - 1, s as u32, r(1, 2 + s as i64)));
            }
            for k in 0..c {
                edges.push((s as u32, next, r(k as i64 - 1, 3)));
                next += 1;
            }
        }
        let t = InfoFlowTree::from_edges(edges).unwrap();
        assert_eq!(caterpillar_spine(&t).unwrap().len(), 7);
        let (c, trace) = to_simple_caterpillar(&t).unwrap();
        assert!(is_simple_caterpillar(&c));
        assert_eq!(caterpillar_spine(&c).unwrap().len(), 14);
        assert!(equivalent(&t, &c));
        assert_eq!(trace.replay(&t).unwrap().to_spec(), c.to_spec());
        let json = trace.to_json();
        assert_eq!(TransformTrace::<Exact>::from_json(&json).unwrap(), trace);
    }

    #[test]
    fn simple_caterpillar_is_fixpoint() {
        let t = InfoFlowTree::from_edges(vec![
            (0, 1, r(1, 2)),
            (1, 2, r(1, 2)),
            (0, 3, r(1, 3)),
            (1, 4, r(1, 3)),
            (2, 5, r(1, 3)),
        ])
        .unwrap();
        assert!(is_simple_caterpillar(&t));
        let (c, trace) = to_simple_caterpillar(&t).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(c.to_spec(), t.to_spec());
    }

    #[test]
    fn degenerate_caterpillars() {
        let pair = InfoFlowTree::from_edges(vec![(0, 1, r(1, 3))]).unwrap();
        let (c, _) = to_simple_caterpillar(&pair).unwrap();
        assert!(is_simple_caterpillar(&c));
        assert!(equivalent(&pair, &c));
        let star = InfoFlowTree::from_edges(vec![(0, 1, r(1, 3)), (0, 2, r(1, 4)), (0, 3, r(1, 5))])
            .unwrap();
        let (c, _) = to_simple_caterpillar(&star).unwrap();
        assert!(is_simple_caterpillar(&c));
        assert!(equivalent(&star, &c));
    }

    #[test]
    fn binary_tree_of_depth_three_is_not_a_caterpillar() {
        let mut edges = Vec::new();
        for p in 1..8u32 {
            edges.push((p, 2 * p, r(1, 2)));
            edges.push((p, 2 * p + 1, r(1, 2)));
        }
        let t = InfoFlowTree::from_edges(edges).unwrap();
        assert!(matches!(to_simple_caterpillar(&t), Err(Error::NotACaterpillar)));
    }

    #[test]
    fn different_correlations_are_not_equivalent() {
        let a = InfoFlowTree::from_edges(vec![(0, 1, r(1, 2))]).unwrap();
        let b = InfoFlowTree::from_edges(vec![(0, 1, r(1, 3))]).unwrap();
        assert!(equivalent(&a, &a));
        assert!(!equivalent(&a, &b));
        let c = InfoFlowTree::from_edges(vec![(0, 2, r(1, 3))]).unwrap();
        assert!(check_equivalence(&a, &c, &Caps::default(), 0.0).is_err());
    }
}
