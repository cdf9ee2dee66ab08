//! Information flow trees: an undirected tree with a correlation in [-1, 1]
//! on every edge and a designated set of observed (leaf) vertices.
//!
//! [`TreeSpec`] is the unchecked form read from disk; [`validate`] lists
//! everything wrong with it and [`InfoFlowTree::new`] only accepts specs with
//! no violations. Every accessor on [`InfoFlowTree`] can therefore assume a
//! connected acyclic graph on at least two vertices.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

/// An edge correlation `ρ(e)`, checked to lie in [-1, 1].
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct Correlation<S>(S);

impl<S: Scalar> Correlation<S> {
    pub fn new(value: S) -> Result<Self> {
        let one = S::one();
        if value > one || value < -one {
            return Err(Error::CorrelationOutOfRange(value.to_string()));
        }
        Ok(Correlation(value))
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self> {
        Self::new(S::from_ratio(numer, denom))
    }

    pub fn one() -> Self {
        Correlation(S::one())
    }

    pub fn value(&self) -> &S {
        &self.0
    }

    pub fn into_inner(self) -> S {
        self.0
    }

    pub fn negated(&self) -> Self {
        Correlation(-self.0.clone())
    }

    /// Products of correlations stay in range.
    pub fn product(&self, other: &Self) -> Self {
        Correlation(self.0.clone() * other.0.clone())
    }

    /// `Pr[X_v = X_u] = ½ + ½ρ`.
    pub fn agree_prob(&self) -> S {
        S::half() + S::half() * self.0.clone()
    }

    /// `Pr[X_v = x_v | X_u = x_u] = ½ + ½ρ x_u x_v`.
    pub fn transition(&self, same: bool) -> S {
        if same {
            S::half() + S::half() * self.0.clone()
        } else {
            S::half() - S::half() * self.0.clone()
        }
    }
}

impl<S: Scalar> fmt::Display for Correlation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<S> {
    pub u: VertexId,
    pub v: VertexId,
    pub rho: Correlation<S>,
}

impl<S> Edge<S> {
    pub fn touches(&self, x: VertexId) -> bool {
        self.u == x || self.v == x
    }

    pub fn other(&self, x: VertexId) -> VertexId {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }

    /// Endpoints ordered `(min, max)`.
    pub fn key(&self) -> (VertexId, VertexId) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

/// Unchecked tree description, as read from or written to JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec<S> {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<(VertexId, VertexId, S)>,
    /// `None`: every degree-1 vertex is a leaf.
    pub leaves: Option<Vec<VertexId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    TooFewVertices { count: usize },
    DuplicateVertex { vertex: VertexId },
    UnknownEndpoint { edge: usize, vertex: VertexId },
    SelfLoop { edge: usize },
    Cycle { edge: usize },
    Disconnected { components: usize },
    CorrelationOutOfRange { edge: usize, value: String },
    LeafNotDegreeOne { vertex: VertexId, degree: usize },
    DuplicateLeaf { vertex: VertexId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewVertices { count } => {
                write!(f, "|V| > 1 required, found {count} vertices")
            }
            Violation::DuplicateVertex { vertex } => write!(f, "duplicate vertex id {vertex}"),
            Violation::UnknownEndpoint { edge, vertex } => {
                write!(f, "edge #{edge} references unknown vertex {vertex}")
            }
            Violation::SelfLoop { edge } => write!(f, "edge #{edge} is a self-loop"),
            Violation::Cycle { edge } => write!(f, "edge #{edge} closes a cycle"),
            Violation::Disconnected { components } => {
                write!(f, "graph is disconnected ({components} components)")
            }
            Violation::CorrelationOutOfRange { edge, value } => {
                write!(f, "edge #{edge} has correlation {value} outside [-1, 1]")
            }
            Violation::LeafNotDegreeOne { vertex, degree } => {
                write!(f, "leaf {vertex} has degree {degree}")
            }
            Violation::DuplicateLeaf { vertex } => write!(f, "leaf {vertex} listed twice"),
        }
    }
}

/// Lists every violated invariant of `spec`; empty means valid.
pub fn validate<S: Scalar>(spec: &TreeSpec<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.vertices.len();
    if n < 2 {
        out.push(Violation::TooFewVertices { count: n });
    }

    let mut index = HashMap::with_capacity(n);
    for (i, &v) in spec.vertices.iter().enumerate() {
        if index.insert(v, i).is_some() {
            out.push(Violation::DuplicateVertex { vertex: v });
        }
    }

    let mut dsu = DisjointSets::new(n);
    let mut degree = vec![0usize; n];
    let one = S::one();
    for (k, (u, v, rho)) in spec.edges.iter().enumerate() {
        if *rho > one || *rho < -one.clone() {
            out.push(Violation::CorrelationOutOfRange {
                edge: k,
                value: rho.to_string(),
            });
        }
        let (iu, iv) = match (index.get(u), index.get(v)) {
            (Some(&a), Some(&b)) => (a, b),
            (a, _) => {
                let missing = if a.is_none() { *u } else { *v };
                out.push(Violation::UnknownEndpoint {
                    edge: k,
                    vertex: missing,
                });
                continue;
            }
        };
        if iu == iv {
            out.push(Violation::SelfLoop { edge: k });
            continue;
        }
        degree[iu] += 1;
        degree[iv] += 1;
        if !dsu.union(iu, iv) {
            out.push(Violation::Cycle { edge: k });
        }
    }
    if n >= 2 {
        let components = dsu.components();
        if components > 1 {
            out.push(Violation::Disconnected { components });
        }
    }

    if let Some(leaves) = &spec.leaves {
        let mut seen = HashSet::new();
        for &l in leaves {
            if !seen.insert(l) {
                out.push(Violation::DuplicateLeaf { vertex: l });
                continue;
            }
            match index.get(&l) {
                None => out.push(Violation::UnknownEndpoint {
                    edge: usize::MAX,
                    vertex: l,
                }),
                Some(&i) if degree[i] != 1 => out.push(Violation::LeafNotDegreeOne {
                    vertex: l,
                    degree: degree[i],
                }),
                _ => {}
            }
        }
    }
    out
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }

    fn components(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}

/// A validated information flow tree.
#[derive(Debug, Clone)]
pub struct InfoFlowTree<S> {
    vertices: Vec<VertexId>,
    edges: Vec<Edge<S>>,
    leaves: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    /// Per vertex index: (neighbour index, edge index).
    adjacency: Vec<Vec<(usize, usize)>>,
    is_leaf: Vec<bool>,
}

impl<S: Scalar> InfoFlowTree<S> {
    pub fn new(spec: TreeSpec<S>) -> Result<Self> {
        let violations = validate(&spec);
        if !violations.is_empty() {
            return Err(Error::InvalidTree(violations));
        }
        let TreeSpec {
            vertices,
            edges,
            leaves,
        } = spec;
        let index: HashMap<_, _> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        let edges: Vec<Edge<S>> = edges
            .into_iter()
            .enumerate()
            .map(|(k, (u, v, rho))| {
                let (iu, iv) = (index[&u], index[&v]);
                adjacency[iu].push((iv, k));
                adjacency[iv].push((iu, k));
                Edge {
                    u,
                    v,
                    rho: Correlation(rho),
                }
            })
            .collect();
        let leaves = leaves.unwrap_or_else(|| {
            vertices
                .iter()
                .filter(|v| adjacency[index[v]].len() == 1)
                .copied()
                .collect()
        });
        let mut is_leaf = vec![false; vertices.len()];
        for l in &leaves {
            is_leaf[index[l]] = true;
        }
        Ok(InfoFlowTree {
            vertices,
            edges,
            leaves,
            index,
            adjacency,
            is_leaf,
        })
    }

    /// Builds a tree from `(u, v, ρ)` triples; vertices are the endpoints in
    /// ascending id order and leaves default to the degree-1 vertices.
    pub fn from_edges(edges: Vec<(u32, u32, S)>) -> Result<Self> {
        let vertices: BTreeSet<VertexId> = edges
            .iter()
            .flat_map(|(u, v, _)| [VertexId(*u), VertexId(*v)])
            .collect();
        Self::new(TreeSpec {
            vertices: vertices.into_iter().collect(),
            edges: edges
                .into_iter()
                .map(|(u, v, r)| (VertexId(u), VertexId(v), r))
                .collect(),
            leaves: None,
        })
    }

    pub fn to_spec(&self) -> TreeSpec<S> {
        TreeSpec {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (e.u, e.v, e.rho.value().clone()))
                .collect(),
            leaves: Some(self.leaves.clone()),
        }
    }

    /// Rebuilds with new edges and vertex list, keeping the leaf designation.
    pub(crate) fn rebuild(
        &self,
        vertices: Vec<VertexId>,
        edges: Vec<(VertexId, VertexId, S)>,
    ) -> Result<Self> {
        Self::new(TreeSpec {
            vertices,
            edges,
            leaves: Some(self.leaves.clone()),
        })
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Result<InfoFlowTree<T>> {
        InfoFlowTree::new(TreeSpec {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (e.u, e.v, f(e.rho.value())))
                .collect(),
            leaves: Some(self.leaves.clone()),
        })
    }
}

impl<S> InfoFlowTree<S> {
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    /// Leaf labels in their canonical order (the order of table bits).
    pub fn leaves(&self) -> &[VertexId] {
        &self.leaves
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.index.contains_key(&v)
    }

    pub fn index_of(&self, v: VertexId) -> Result<usize> {
        self.index.get(&v).copied().ok_or(Error::UnknownVertex(v))
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.index.get(&v).is_some_and(|&i| self.is_leaf[i])
    }

    pub(crate) fn is_leaf_at(&self, i: usize) -> bool {
        self.is_leaf[i]
    }

    pub fn internal_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|&(i, _)| !self.is_leaf[i])
            .map(|(_, &v)| v)
    }

    pub fn degree(&self, v: VertexId) -> Result<usize> {
        Ok(self.adjacency[self.index_of(v)?].len())
    }

    /// Neighbours of `v` with the connecting edge, in edge-list order.
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<(VertexId, &Edge<S>)>> {
        let i = self.index_of(v)?;
        Ok(self.adjacency[i]
            .iter()
            .map(|&(j, k)| (self.vertices[j], &self.edges[k]))
            .collect())
    }

    pub(crate) fn adjacency_at(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn edge_index(&self, u: VertexId, v: VertexId) -> Result<usize> {
        let iu = self.index_of(u)?;
        let iv = self.index_of(v)?;
        self.adjacency[iu]
            .iter()
            .find(|&&(j, _)| j == iv)
            .map(|&(_, k)| k)
            .ok_or(Error::NoSuchEdge(u, v))
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Result<&Edge<S>> {
        Ok(&self.edges[self.edge_index(u, v)?])
    }

    /// The deterministic root: lowest vertex id.
    pub fn root(&self) -> VertexId {
        *self.vertices.iter().min().expect("tree has vertices")
    }

    pub fn max_id(&self) -> VertexId {
        *self.vertices.iter().max().expect("tree has vertices")
    }

    /// Vertex indices in BFS order from `root`, with parent `(index, edge)`.
    pub(crate) fn bfs_from(&self, root: usize) -> Vec<(usize, Option<(usize, usize)>)> {
        let mut order = Vec::with_capacity(self.vertices.len());
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([(root, None)]);
        seen[root] = true;
        while let Some((i, parent)) = queue.pop_front() {
            order.push((i, parent));
            for &(j, k) in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back((j, Some((i, k))));
                }
            }
        }
        order
    }

    /// Vertices of the unique `u`–`v` path, endpoints included.
    pub fn path(&self, u: VertexId, v: VertexId) -> Result<Vec<VertexId>> {
        let iu = self.index_of(u)?;
        let iv = self.index_of(v)?;
        let mut parent = vec![None; self.vertices.len()];
        for (i, p) in self.bfs_from(iu) {
            parent[i] = p.map(|(j, _)| j);
        }
        let mut path = vec![self.vertices[iv]];
        let mut cur = iv;
        while let Some(p) = parent[cur] {
            path.push(self.vertices[p]);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Vertices reachable from `root` without crossing into any of `cut`.
    pub fn component_without(&self, root: VertexId, cut: &[VertexId]) -> Result<Vec<VertexId>> {
        let r = self.index_of(root)?;
        let blocked: HashSet<usize> = cut
            .iter()
            .map(|&c| self.index_of(c))
            .collect::<Result<_>>()?;
        let mut seen = vec![false; self.vertices.len()];
        seen[r] = true;
        let mut stack = vec![r];
        let mut out = Vec::new();
        while let Some(i) = stack.pop() {
            out.push(self.vertices[i]);
            for &(j, _) in &self.adjacency[i] {
                if !seen[j] && !blocked.contains(&j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
