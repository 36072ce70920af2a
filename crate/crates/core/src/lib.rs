//! Tree-distributed Kaczmarz iteration.
//!
//! Each node of a rooted tree holds one or more rows of a linear system
//! `A x = b`. One iteration sends an estimate from the root to the leaves,
//! applying a relaxed Kaczmarz projection at every node on the way
//! (dispersion), then averages the leaf results back up the tree with convex
//! edge weights (pooling).
//!
//! Besides the iteration itself the crate provides the equivalent affine
//! SOR-form map, spectral analysis of the relaxation parameter, reference
//! oracles and a perturbation model for transmission errors.
//!
//! `no_std`; needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod oracles;
pub mod robustness;
pub mod solver;
pub mod sor;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::{Matrix, RowEquation, Vector};
pub use solver::{solve, SolveResult, SolverConfig, TraceLevel, TreeSystem};
pub use topology::{Edge, NodeId, TreeDescription, TreeTopology};
