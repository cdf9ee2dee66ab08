//! Exact inference for information flow trees: ±1 variables on the vertices
//! of a tree, where each edge `e = (u, v)` makes `X_u X_v` have mean `ρ(e)`.
//!
//! The crate computes leaf laws and conditional covariances in closed form,
//! rewrites trees without changing their leaf law, evaluates the averaged
//! covariance and information metrics, and checks covariance bounds against
//! brute-force enumeration. All numeric kernels are generic over [`Scalar`],
//! so the same code runs on exact rationals and on `f64`.

pub mod assignment;
pub mod bounds;
pub mod cli;
pub mod covariance;
pub mod distribution;
pub mod error;
pub mod generate;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod transforms;
pub mod tree;

pub use assignment::{Assignment, Spin};
pub use distribution::{Caps, JointDistribution, PairTable};
pub use error::{Error, Result};
pub use inference::{
    leaf_distribution, leaf_distribution_bruteforce, sample, subtree_event_prob,
    vertex_joint_bruteforce, Sampler, TreeSample,
};
pub use scalar::{Exact, Scalar};
pub use tree::{validate, Correlation, Edge, InfoFlowTree, TreeSpec, VertexId, Violation};
