//! The distributed iteration: dispersion from the root to the leaves, then
//! pooling back to the root.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, check_dim, distance, kaczmarz_update_in_place, norm, Matrix, RowEquation, Vector};
use crate::topology::{NodeId, TreeTopology};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// Equations attached to the nodes of a tree. Each node holds one or more
/// rows, applied in stored order during dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSystem {
    tree: TreeTopology,
    equations: Vec<Vec<RowEquation>>,
    dimension: usize,
}

impl TreeSystem {
    /// `equations[v]` are the rows of node `v`.
    pub fn new(tree: TreeTopology, equations: Vec<Vec<RowEquation>>) -> Result<Self> {
        check_dim(tree.node_count(), equations.len())?;
        let dimension = equations
            .iter()
            .flat_map(|rows| rows.first())
            .map(|r| r.dim())
            .next()
            .unwrap_or(0);
        for (v, rows) in equations.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::MissingEquations(NodeId(v)));
            }
            for r in rows {
                check_dim(dimension, r.dim())?;
            }
        }
        Ok(TreeSystem {
            tree,
            equations,
            dimension,
        })
    }

    /// One row of `a` per node, row `i` on node `i`.
    pub fn one_row_per_node(tree: TreeTopology, a: &Matrix, b: &[f64]) -> Result<Self> {
        check_dim(tree.node_count(), a.rows())?;
        check_dim(a.rows(), b.len())?;
        let eqs = (0..a.rows())
            .map(|i| RowEquation::new(a.row(i).to_vec(), b[i]).map(|e| vec![e]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tree, eqs)
    }

    /// All rows of `a` on a chain, one per node: the classical cyclic sweep.
    pub fn chain(a: &Matrix, b: &[f64]) -> Result<Self> {
        Self::one_row_per_node(TreeTopology::chain(a.rows())?, a, b)
    }

    pub fn tree(&self) -> &TreeTopology {
        &self.tree
    }

    pub fn equations(&self, v: NodeId) -> &[RowEquation] {
        &self.equations[v.0]
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn total_rows(&self) -> usize {
        self.equations.iter().map(Vec::len).sum()
    }

    /// All rows stacked in ascending node order, each node's rows in stored
    /// order, with the owning node of every row.
    pub fn stacked(&self) -> (Matrix, Vector, Vec<NodeId>) {
        let mut a = Matrix::zeros(self.total_rows(), self.dimension);
        let mut b = Vec::with_capacity(self.total_rows());
        let mut owner = Vec::with_capacity(self.total_rows());
        let mut i = 0;
        for (v, rows) in self.equations.iter().enumerate() {
            for r in rows {
                a.row_mut(i).copy_from_slice(r.coefficients());
                b.push(r.rhs());
                owner.push(NodeId(v));
                i += 1;
            }
        }
        (a, b, owner)
    }

    /// Rows met along the path from the root to `v`, in application order.
    pub fn path_rows(&self, v: NodeId) -> Result<Vec<&RowEquation>> {
        Ok(self
            .tree
            .path_from_root(v)?
            .into_iter()
            .flat_map(|u| self.equations[u.0].iter())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Dispersion,
    Pooling,
}

/// An estimate in transit: sent down by `from` during dispersion, or up to
/// the parent of `from` during pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub stage: Stage,
    pub from: NodeId,
}

/// Per-node estimates from one full sweep, indexed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEstimates {
    pub dispersed: Vec<Vector>,
    pub pooled: Vec<Vector>,
}

/// One dispersion + pooling pass. `on_message` may alter every transmitted
/// estimate: the one a non-leaf node sends to its children, and the one a
/// non-root node sends to its parent.
pub fn sweep_with<F>(system: &TreeSystem, omega: f64, x_root: &[f64], mut on_message: F) -> Result<SweepEstimates>
where
    F: FnMut(Message, &mut [f64]),
{
    check_dim(system.dimension, x_root.len())?;
    let tree = &system.tree;
    let n = tree.node_count();
    let order = tree.preorder();

    let mut dispersed: Vec<Vector> = vec![Vec::new(); n];
    let mut sent_down: Vec<Vector> = vec![Vec::new(); n];
    for &v in &order {
        let mut x = match tree.parent(v) {
            Some(p) => sent_down[p.0].clone(),
            None => x_root.to_vec(),
        };
        for eq in &system.equations[v.0] {
            kaczmarz_update_in_place(eq, &mut x, omega)?;
        }
        if !tree.is_leaf(v) {
            let mut msg = x.clone();
            on_message(
                Message {
                    stage: Stage::Dispersion,
                    from: v,
                },
                &mut msg,
            );
            sent_down[v.0] = msg;
        }
        dispersed[v.0] = x;
    }

    let mut pooled: Vec<Vector> = vec![Vec::new(); n];
    let mut sent_up: Vec<Vector> = vec![Vec::new(); n];
    for &v in order.iter().rev() {
        let y = if tree.is_leaf(v) {
            dispersed[v.0].clone()
        } else {
            let mut acc = vec![0.0; system.dimension];
            for &c in tree.children(v) {
                let w = tree.edge_weight_to_parent(c).expect("child has a parent");
                axpy(w, &sent_up[c.0], &mut acc);
            }
            acc
        };
        if tree.parent(v).is_some() {
            let mut msg = y.clone();
            on_message(
                Message {
                    stage: Stage::Pooling,
                    from: v,
                },
                &mut msg,
            );
            sent_up[v.0] = msg;
        }
        pooled[v.0] = y;
    }

    Ok(SweepEstimates { dispersed, pooled })
}

/// Estimates `x_v` for every node, indexed by node id, from root input `x_root`.
pub fn disperse(system: &TreeSystem, omega: f64, x_root: &[f64]) -> Result<Vec<Vector>> {
    Ok(sweep_with(system, omega, x_root, |_, _| {})?.dispersed)
}

/// Bottom-up weighted combination of leaf estimates. Returns the root value
/// and `y_v` for every node, indexed by node id.
pub fn pool(tree: &TreeTopology, leaf_estimates: &BTreeMap<NodeId, Vector>) -> Result<(Vector, Vec<Vector>)> {
    let dim = match tree.leaves().first().and_then(|l| leaf_estimates.get(l)) {
        Some(v) => v.len(),
        None => return Err(Error::MissingLeafEstimate(tree.leaves()[0])),
    };
    let mut pooled: Vec<Vector> = vec![Vec::new(); tree.node_count()];
    for v in tree.postorder() {
        pooled[v.0] = if tree.is_leaf(v) {
            let y = leaf_estimates.get(&v).ok_or(Error::MissingLeafEstimate(v))?;
            check_dim(dim, y.len())?;
            y.clone()
        } else {
            let mut acc = vec![0.0; dim];
            for &c in tree.children(v) {
                let w = tree.edge_weight_to_parent(c).expect("child has a parent");
                axpy(w, &pooled[c.0], &mut acc);
            }
            acc
        };
    }
    Ok((pooled[tree.root().0].clone(), pooled))
}

/// One full iteration `x ↦ 𝒬^ω x`.
pub fn iterate(system: &TreeSystem, omega: f64, x: &[f64]) -> Result<Vector> {
    let mut est = sweep_with(system, omega, x, |_, _| {})?;
    Ok(core::mem::take(&mut est.pooled[system.tree.root().0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceLevel {
    Off,
    #[default]
    RootOnly,
    AllNodes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub omega: f64,
    pub max_iterations: usize,
    /// Stop once `‖x⁽ⁿ⁺¹⁾ − x⁽ⁿ⁾‖ ≤ tolerance · max(1, ‖x‖)`.
    pub tolerance: f64,
    /// Defaults to the zero vector.
    pub initial: Option<Vector>,
    pub trace_level: TraceLevel,
}

impl SolverConfig {
    pub fn new(omega: f64) -> Self {
        SolverConfig {
            omega,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            initial: None,
            trace_level: TraceLevel::RootOnly,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_initial(mut self, x0: Vector) -> Self {
        self.initial = Some(x0);
        self
    }

    pub fn with_trace(mut self, level: TraceLevel) -> Self {
        self.trace_level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidConfig("relaxation parameter must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be non-negative"));
        }
        Ok(())
    }

    pub(crate) fn start(&self, dim: usize) -> Result<Vector> {
        match &self.initial {
            Some(x0) => {
                check_dim(dim, x0.len())?;
                Ok(x0.clone())
            }
            None => Ok(vec![0.0; dim]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// `x⁽ⁿ⁾`
    pub input: Vector,
    /// `x⁽ⁿ⁺¹⁾ = y_r⁽ⁿ⁾`
    pub output: Vector,
    pub change: f64,
    /// Present only for [`TraceLevel::AllNodes`].
    pub nodes: Option<SweepEstimates>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub level: TraceLevel,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub solution: Vector,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_change: f64,
    pub trace: Option<IterationTrace>,
}

pub(crate) fn change_within(change: f64, tol: f64, before: &[f64], after: &[f64]) -> bool {
    let scale = norm(before).min(norm(after)).max(1.0);
    change <= tol * scale
}

/// Repeats [`iterate`] until the successive change drops below tolerance or
/// the iteration budget runs out.
pub fn solve(system: &TreeSystem, config: &SolverConfig) -> Result<SolveResult> {
    solve_hooked(system, config, |_, _, _| {})
}

/// [`solve`] with `on_message(n, message, payload)` applied to every
/// transmitted estimate of iteration `n`.
pub(crate) fn solve_hooked<F>(system: &TreeSystem, config: &SolverConfig, mut on_message: F) -> Result<SolveResult>
where
    F: FnMut(usize, Message, &mut [f64]),
{
    config.validate()?;
    let mut x = config.start(system.dimension)?;
    let mut trace = match config.trace_level {
        TraceLevel::Off => None,
        level => Some(IterationTrace {
            level,
            records: Vec::new(),
        }),
    };
    let root = system.tree.root().0;
    let mut change = f64::INFINITY;
    let mut converged = false;
    let mut used = 0;
    while used < config.max_iterations {
        let est = sweep_with(system, config.omega, &x, |m, p| on_message(used, m, p))?;
        let next = est.pooled[root].clone();
        change = distance(&next, &x);
        if !change.is_finite() {
            return Err(Error::NonFinite);
        }
        converged = change_within(change, config.tolerance, &x, &next);
        if let Some(t) = trace.as_mut() {
            t.records.push(IterationRecord {
                input: x.clone(),
                output: next.clone(),
                change,
                nodes: (t.level == TraceLevel::AllNodes).then_some(est),
            });
        }
        x = next;
        used += 1;
        if converged {
            break;
        }
    }
    Ok(SolveResult {
        solution: x,
        iterations_used: used,
        converged,
        final_change: change,
        trace,
    })
}

/// Per-node `(x_v, y_v)` from the last recorded iteration, indexed by node id.
pub fn node_limits(trace: &IterationTrace) -> Result<Vec<(Vector, Vector)>> {
    let last = trace.records.last().ok_or(Error::NoTrace)?;
    let nodes = last.nodes.as_ref().ok_or(Error::NoTrace)?;
    Ok(nodes
        .dispersed
        .iter()
        .cloned()
        .zip(nodes.pooled.iter().cloned())
        .collect())
}
