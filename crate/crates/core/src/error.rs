use alloc::vec::Vec;

use crate::topology::{NodeId, TopologyViolation};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,

    #[error("zero row (all coefficients are zero)")]
    ZeroRow,

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("invalid tree: {} violation(s)", .0.len())]
    InvalidTree(Vec<TopologyViolation>),

    #[error("node {u} is not a successor of node {v}")]
    NotOnPath { u: NodeId, v: NodeId },

    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("node {0} carries no equations")]
    MissingEquations(NodeId),

    #[error("no estimate supplied for leaf {0}")]
    MissingLeafEstimate(NodeId),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("no per-node trace was recorded")]
    NoTrace,

    #[error("spectral radius {0} is not below one")]
    SpectralRadiusAtLeastOne(f64),

    #[error("system is inconsistent (residual {residual:e})")]
    Inconsistent { residual: f64 },

    #[error("fixed-point residual {0:e} exceeds tolerance")]
    FixedPointResidual(f64),

    #[error("operation not supported for this variant")]
    VariantUnsupported,

    #[error("system too large for the brute-force oracle ({rows} rows, limit {limit})")]
    TooLarge { rows: usize, limit: usize },

    #[error("singular linear system")]
    Singular,
}
