//! Exact leaf laws, subtree event probabilities and forward sampling.
//!
//! [`leaf_distribution`] is a pruning pass: each vertex sends its parent a
//! pair of tables `Pr[subtree leaves = · | X_v = ±1]`, children are combined
//! by Kronecker product and the lowest-id root averages the two tables.
//! [`vertex_joint_bruteforce`] enumerates all `2^|V|` vertex assignments
//! straight from the edge-product formula and serves as the oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{Assignment, Spin};
use crate::distribution::{Caps, JointDistribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{InfoFlowTree, VertexId};

/// Conditional leaf tables for one subtree, one per value of its root.
struct Message<S> {
    labels: Vec<VertexId>,
    given: [Vec<S>; 2],
}

impl<S: Scalar> Message<S> {
    fn unit() -> Self {
        Message {
            labels: Vec::new(),
            given: [vec![S::one()], vec![S::one()]],
        }
    }

    fn indicator(leaf: VertexId) -> Self {
        Message {
            labels: vec![leaf],
            given: [vec![S::one(), S::zero()], vec![S::zero(), S::one()]],
        }
    }

    /// Pushes the message through an edge: tables now condition on the
    /// other endpoint.
    fn through_edge(self, same: &S, diff: &S) -> Self {
        let [plus, minus] = self.given;
        let mix = |a: &[S], b: &[S]| -> Vec<S> {
            a.iter()
                .zip(b)
                .map(|(x, y)| same.clone() * x.clone() + diff.clone() * y.clone())
                .collect()
        };
        Message {
            labels: self.labels,
            given: [mix(&plus, &minus), mix(&minus, &plus)],
        }
    }

    fn kron(self, other: Message<S>) -> Self {
        let mut labels = self.labels;
        labels.extend(other.labels);
        let given = [0, 1].map(|x| {
            let (a, b) = (&self.given[x], &other.given[x]);
            let mut out = Vec::with_capacity(a.len() * b.len());
            for hi in b {
                for lo in a {
                    out.push(lo.clone() * hi.clone());
                }
            }
            out
        });
        Message { labels, given }
    }
}

/// Exact joint law of the leaves, in the tree's leaf order.
pub fn leaf_distribution<S: Scalar>(
    tree: &InfoFlowTree<S>,
    caps: &Caps,
) -> Result<JointDistribution<S>> {
    caps.check_leaves(tree.leaves().len())?;
    let root = tree.index_of(tree.root())?;
    let order = tree.bfs_from(root);
    let mut inbox: Vec<Option<Message<S>>> = (0..tree.num_vertices()).map(|_| None).collect();

    for &(i, parent) in order.iter().rev() {
        let own = if tree.is_leaf_at(i) {
            Message::indicator(tree.vertices()[i])
        } else {
            Message::unit()
        };
        let msg = match inbox[i].take() {
            Some(children) => own.kron(children),
            None => own,
        };
        match parent {
            Some((p, k)) => {
                let rho = &tree.edges()[k].rho;
                let sent = msg.through_edge(&rho.transition(true), &rho.transition(false));
                inbox[p] = Some(match inbox[p].take() {
                    Some(acc) => acc.kron(sent),
                    None => sent,
                });
            }
            None => {
                let [plus, minus] = msg.given;
                let probs = plus
                    .into_iter()
                    .zip(minus)
                    .map(|(a, b)| S::half() * (a + b))
                    .collect();
                let dist = JointDistribution::from_parts_unchecked(msg.labels, probs);
                return dist.reorder(tree.leaves());
            }
        }
    }
    unreachable!("BFS order ends at the root")
}

/// Law of all vertices (in `tree.vertices()` order) by enumeration of
/// `∏_e (½ + ½ρ(e) x_u x_v)` times the root's ½.
pub fn vertex_joint_bruteforce<S: Scalar>(
    tree: &InfoFlowTree<S>,
    caps: &Caps,
) -> Result<JointDistribution<S>> {
    caps.check_vertices(tree.num_vertices())?;
    let n = tree.num_vertices();
    let ends: Vec<(usize, usize)> = tree
        .edges()
        .iter()
        .map(|e| Ok((tree.index_of(e.u)?, tree.index_of(e.v)?)))
        .collect::<Result<_>>()?;
    let factors: Vec<[S; 2]> = tree
        .edges()
        .iter()
        .map(|e| [e.rho.transition(true), e.rho.transition(false)])
        .collect();
    let probs = (0..1usize << n)
        .map(|x| {
            ends.iter()
                .zip(&factors)
                .fold(S::half(), |acc, (&(a, b), f)| {
                    acc * f[((x >> a) ^ (x >> b)) & 1].clone()
                })
        })
        .collect();
    Ok(JointDistribution::from_parts_unchecked(
        tree.vertices().to_vec(),
        probs,
    ))
}

/// Marginal of [`vertex_joint_bruteforce`] onto the leaves.
pub fn leaf_distribution_bruteforce<S: Scalar>(
    tree: &InfoFlowTree<S>,
    caps: &Caps,
) -> Result<JointDistribution<S>> {
    vertex_joint_bruteforce(tree, caps)?.marginal(tree.leaves())
}

/// `Pr[outcome | X_root = root_value]` where the subtree is everything
/// reachable from `root` without entering `cut`.
///
/// `outcome` may name any subset of the subtree's leaves; unnamed leaves are
/// summed out. The root may itself be a leaf named in `outcome`.
pub fn subtree_event_prob<S: Scalar>(
    tree: &InfoFlowTree<S>,
    root: VertexId,
    cut: &[VertexId],
    outcome: &Assignment,
    root_value: Spin,
) -> Result<S> {
    let members = tree.component_without(root, cut)?;
    for l in outcome.labels() {
        if members.binary_search(&l).is_err() {
            return Err(Error::InvalidArgument(format!(
                "outcome label {l} is outside the subtree rooted at {root}"
            )));
        }
        if !tree.is_leaf(l) {
            return Err(Error::NotLeaf(l));
        }
    }
    Ok(subtree_lambdas(tree, root, cut, outcome)?[root_value.bit()].clone())
}

/// Both `λ^+` and `λ^-` in one pass, indexed by [`Spin::bit`].
pub(crate) fn subtree_lambdas<S: Scalar>(
    tree: &InfoFlowTree<S>,
    root: VertexId,
    cut: &[VertexId],
    outcome: &Assignment,
) -> Result<[S; 2]> {
    let r = tree.index_of(root)?;
    let blocked: Vec<usize> = cut
        .iter()
        .map(|&c| tree.index_of(c))
        .collect::<Result<_>>()?;
    // explicit stack post-order over the component
    let n = tree.num_vertices();
    let mut f: Vec<[S; 2]> = vec![[S::one(), S::one()]; n];
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::new();
    let mut stack = vec![r];
    parent[r] = r;
    while let Some(i) = stack.pop() {
        order.push(i);
        for &(j, _) in tree.adjacency_at(i) {
            if parent[j] == usize::MAX && !blocked.contains(&j) {
                parent[j] = i;
                stack.push(j);
            }
        }
    }
    for &i in order.iter().rev() {
        if let Some(s) = outcome.get(tree.vertices()[i]) {
            f[i][(-s).bit()] = S::zero();
        }
        if i != r {
            let p = parent[i];
            let rho = &tree.edge_between(tree.vertices()[i], tree.vertices()[p])?.rho;
            let (same, diff) = (rho.transition(true), rho.transition(false));
            let [fp, fm] = f[i].clone();
            let up = [
                same.clone() * fp.clone() + diff.clone() * fm.clone(),
                diff * fp + same * fm,
            ];
            f[p][0] = f[p][0].clone() * up[0].clone();
            f[p][1] = f[p][1].clone() * up[1].clone();
        }
    }
    Ok(f[r].clone())
}

/// One draw of every vertex and edge variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSample {
    pub vertices: Assignment,
    /// `R_(u,v) = X_u X_v`, in edge-list order.
    pub edges: Vec<EdgeSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSample {
    pub u: VertexId,
    pub v: VertexId,
    pub value: Spin,
}

/// Root-then-propagate sampler with the traversal precomputed.
#[derive(Debug, Clone)]
pub struct Sampler {
    vertices: Vec<VertexId>,
    edges: Vec<(usize, usize)>,
    /// (vertex, parent, Pr[agree with parent]) in BFS order, root first.
    steps: Vec<(usize, usize, f64)>,
    root: usize,
    leaf_positions: Vec<usize>,
}

impl Sampler {
    pub fn new<S: Scalar>(tree: &InfoFlowTree<S>) -> Result<Self> {
        let root = tree.index_of(tree.root())?;
        let steps = tree
            .bfs_from(root)
            .into_iter()
            .filter_map(|(i, p)| {
                p.map(|(j, k)| (i, j, tree.edges()[k].rho.agree_prob().to_f64()))
            })
            .collect();
        let edges = tree
            .edges()
            .iter()
            .map(|e| Ok((tree.index_of(e.u)?, tree.index_of(e.v)?)))
            .collect::<Result<_>>()?;
        let leaf_positions = tree
            .leaves()
            .iter()
            .map(|&l| tree.index_of(l))
            .collect::<Result<_>>()?;
        Ok(Sampler {
            vertices: tree.vertices().to_vec(),
            edges,
            steps,
            root,
            leaf_positions,
        })
    }

    /// Vertex values as bits (`+1 -> 0`), in vertex order.
    pub fn draw_bits<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut x = vec![0usize; self.vertices.len()];
        x[self.root] = usize::from(rng.random::<f64>() >= 0.5);
        for &(i, p, agree) in &self.steps {
            // u < p is exact at p = 0 and p = 1
            let same = rng.random::<f64>() < agree;
            x[i] = if same { x[p] } else { x[p] ^ 1 };
        }
        x
    }

    /// Index of the drawn leaf outcome in the leaf table.
    pub fn draw_leaf_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x = self.draw_bits(rng);
        self.leaf_positions
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &i)| acc | (x[i] << k))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TreeSample {
        let x = self.draw_bits(rng);
        TreeSample {
            vertices: self
                .vertices
                .iter()
                .zip(&x)
                .map(|(&v, &b)| (v, Spin::from_bit(b)))
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| EdgeSample {
                    u: self.vertices[a],
                    v: self.vertices[b],
                    value: Spin::from_bit(x[a] ^ x[b]),
                })
                .collect(),
        }
    }
}

/// A single seeded draw.
pub fn sample<S: Scalar>(tree: &InfoFlowTree<S>, seed: u64) -> Result<TreeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Sampler::new(tree)?.draw(&mut rng))
}
