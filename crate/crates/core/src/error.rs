use thiserror::Error;

use crate::tree::{VertexId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {}", join_violations(.0))]
    InvalidTree(Vec<Violation>),

    #[error("vertex {0} is not in the tree")]
    UnknownVertex(VertexId),

    #[error("vertex {0} is a leaf")]
    IsLeaf(VertexId),

    #[error("vertex {0} is not a leaf")]
    NotLeaf(VertexId),

    #[error("vertex {vertex} has degree {degree}, expected {expected}")]
    WrongDegree {
        vertex: VertexId,
        degree: usize,
        expected: usize,
    },

    #[error("no edge between {0} and {1}")]
    NoSuchEdge(VertexId, VertexId),

    #[error("{what} has size {size}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("conditioning event has probability zero")]
    ZeroProbability,

    #[error("correlation {0} outside [-1, 1]")]
    CorrelationOutOfRange(String),

    #[error("split factors multiply to {product}, edge correlation is {expected}")]
    ProductMismatch { product: String, expected: String },

    #[error("label sets differ")]
    LabelMismatch,

    #[error("label {0} is not part of the distribution")]
    UnknownLabel(VertexId),

    #[error("tree is not a caterpillar")]
    NotACaterpillar,

    #[error("tree is not a star")]
    NotAStar,

    #[error("{0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable kind, used for CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) => "format",
            Error::CapExceeded { .. } => "cap",
            Error::InvalidTree(_) => "invalid-tree",
            Error::ZeroProbability => "zero-probability",
            _ => "invalid-argument",
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
