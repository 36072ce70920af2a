//! Rooted, weighted trees that index the equations.
//!
//! A [`TreeTopology`] is only ever built from a [`TreeDescription`] that
//! passed [`validate`], and is immutable afterwards. Children are kept in
//! ascending [`NodeId`] order and every traversal in the crate follows that
//! order, so floating-point sums are reproducible bit for bit.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Tolerance on `Σ_{u ∈ C(v)} w(u,v) = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
    /// `None` means "use the uniform default `1/|C(parent)|`".
    pub weight: Option<f64>,
}

impl Edge {
    pub fn new(parent: usize, child: usize) -> Self {
        Edge {
            parent: NodeId(parent),
            child: NodeId(child),
            weight: None,
        }
    }

    pub fn weighted(parent: usize, child: usize, weight: f64) -> Self {
        Edge {
            parent: NodeId(parent),
            child: NodeId(child),
            weight: Some(weight),
        }
    }
}

/// Unvalidated tree as read from a file or assembled by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDescription {
    pub node_count: usize,
    pub root: NodeId,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyViolation {
    EmptyTree,
    UnknownNode(NodeId),
    RootHasParent { parent: NodeId },
    MultipleParents { child: NodeId, first: NodeId, second: NodeId },
    CycleDetected { node: NodeId },
    DisconnectedNode(NodeId),
    WeightNotPositive { parent: NodeId, child: NodeId, weight: f64 },
    /// Some but not all child edges of `parent` carry an explicit weight.
    MixedWeights { parent: NodeId },
    WeightsNotNormalized { parent: NodeId, sum: f64 },
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TopologyViolation::*;
        match self {
            EmptyTree => write!(f, "tree has no nodes"),
            UnknownNode(v) => write!(f, "node {v} is out of range"),
            RootHasParent { parent } => write!(f, "root has a parent edge from node {parent}"),
            MultipleParents {
                child,
                first,
                second,
            } => write!(f, "node {child} has two parents ({first} and {second})"),
            CycleDetected { node } => write!(f, "cycle through node {node}"),
            DisconnectedNode(v) => write!(f, "node {v} is not connected to the root"),
            WeightNotPositive {
                parent,
                child,
                weight,
            } => write!(f, "edge {parent}->{child} has non-positive weight {weight}"),
            MixedWeights { parent } => write!(
                f,
                "children of node {parent} mix explicit and omitted weights"
            ),
            WeightsNotNormalized { parent, sum } => write!(
                f,
                "weights on the child edges of node {parent} sum to {sum}, not 1"
            ),
        }
    }
}

/// Checks every tree invariant and returns the full list of violations.
pub fn validate(desc: &TreeDescription) -> core::result::Result<(), Vec<TopologyViolation>> {
    match analyze(desc) {
        Ok(_) => Ok(()),
        Err(v) => Err(v),
    }
}

struct Analyzed {
    parent: Vec<Option<NodeId>>,
    weight: Vec<f64>,
}

fn analyze(desc: &TreeDescription) -> core::result::Result<Analyzed, Vec<TopologyViolation>> {
    use TopologyViolation::*;
    let n = desc.node_count;
    let mut errs = Vec::new();
    if n == 0 {
        return Err(vec![EmptyTree]);
    }
    if desc.root.0 >= n {
        errs.push(UnknownNode(desc.root));
    }

    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut given: Vec<Option<f64>> = vec![None; n];
    for e in &desc.edges {
        let mut bad = false;
        for v in [e.parent, e.child] {
            if v.0 >= n {
                errs.push(UnknownNode(v));
                bad = true;
            }
        }
        if bad {
            continue;
        }
        if e.child == desc.root {
            errs.push(RootHasParent { parent: e.parent });
            continue;
        }
        if let Some(first) = parent[e.child.0] {
            errs.push(MultipleParents {
                child: e.child,
                first,
                second: e.parent,
            });
            continue;
        }
        parent[e.child.0] = Some(e.parent);
        given[e.child.0] = e.weight;
        if let Some(w) = e.weight {
            if !(w > 0.0) || !w.is_finite() {
                errs.push(WeightNotPositive {
                    parent: e.parent,
                    child: e.child,
                    weight: w,
                });
            }
        }
    }
    if !errs.is_empty() && desc.root.0 >= n {
        return Err(errs);
    }

    // every node must reach the root by walking parents
    for start in 0..n {
        if start == desc.root.0 {
            continue;
        }
        let mut v = start;
        let mut steps = 0;
        loop {
            match parent[v] {
                None => {
                    if v != desc.root.0 {
                        errs.push(DisconnectedNode(NodeId(start)));
                    }
                    break;
                }
                Some(p) => {
                    v = p.0;
                    if v == desc.root.0 {
                        break;
                    }
                    steps += 1;
                    if steps >= n {
                        errs.push(CycleDetected {
                            node: NodeId(start),
                        });
                        break;
                    }
                }
            }
        }
    }

    // weights: uniform default, or explicit and normalized
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[p.0].push(c);
        }
    }
    let mut weight = vec![1.0; n];
    for (p, kids) in children.iter().enumerate() {
        if kids.is_empty() {
            continue;
        }
        let explicit = kids.iter().filter(|&&c| given[c].is_some()).count();
        if explicit == 0 {
            let w = 1.0 / kids.len() as f64;
            for &c in kids {
                weight[c] = w;
            }
        } else if explicit < kids.len() {
            errs.push(MixedWeights {
                parent: NodeId(p),
            });
        } else {
            let mut sum = 0.0;
            for &c in kids {
                let w = given[c].unwrap_or(0.0);
                weight[c] = w;
                sum += w;
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                errs.push(WeightsNotNormalized {
                    parent: NodeId(p),
                    sum,
                });
            }
        }
    }

    if errs.is_empty() {
        Ok(Analyzed { parent, weight })
    } else {
        Err(errs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafPath {
    pub leaf: NodeId,
    /// Root first, leaf last.
    pub nodes: Vec<NodeId>,
}

impl LeafPath {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeTopology {
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    /// `w(v, parent(v))`; 1 at the root.
    weight_to_parent: Vec<f64>,
    leaves: Vec<NodeId>,
    level: Vec<usize>,
}

impl TreeTopology {
    pub fn new(desc: &TreeDescription) -> Result<Self> {
        let Analyzed { parent, weight } = analyze(desc).map_err(Error::InvalidTree)?;
        let n = desc.node_count;
        let mut children = vec![Vec::new(); n];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[p.0].push(NodeId(c));
            }
        }
        let leaves = (0..n)
            .filter(|&v| children[v].is_empty())
            .map(NodeId)
            .collect();
        let mut tree = TreeTopology {
            root: desc.root,
            parent,
            children,
            weight_to_parent: weight,
            leaves,
            level: vec![0; n],
        };
        for v in tree.preorder() {
            if let Some(p) = tree.parent[v.0] {
                tree.level[v.0] = tree.level[p.0] + 1;
            }
        }
        Ok(tree)
    }

    /// Root only.
    pub fn single() -> Self {
        Self::new(&TreeDescription {
            node_count: 1,
            root: NodeId(0),
            edges: Vec::new(),
        })
        .expect("single node tree is valid")
    }

    /// Path `0 → 1 → … → n−1` rooted at 0; all weights are 1.
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(&TreeDescription {
            node_count: n,
            root: NodeId(0),
            edges: (1..n).map(|c| Edge::new(c - 1, c)).collect(),
        })
    }

    /// Root 0 with leaves `1..=leaves`, uniform weights.
    pub fn star(leaves: usize) -> Result<Self> {
        Self::new(&TreeDescription {
            node_count: leaves + 1,
            root: NodeId(0),
            edges: (1..=leaves).map(|c| Edge::new(0, c)).collect(),
        })
    }

    /// Builds from a parent array (`None` exactly at the root), uniform weights.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self> {
        let root = parents.iter().position(|p| p.is_none()).unwrap_or(0);
        Self::new(&TreeDescription {
            node_count: parents.len(),
            root: NodeId(root),
            edges: parents
                .iter()
                .enumerate()
                .filter_map(|(c, p)| p.map(|p| Edge::new(p, c)))
                .collect(),
        })
    }

    /// The three-node experiment tree: root with two leaves
    /// (one-based labels 1, 2, 3 map to ids 0, 1, 2).
    pub fn fig_graphs_3() -> Self {
        Self::star(2).expect("valid")
    }

    /// The eight-node experiment tree `1→{2,3}, 2→{4,5}, 3→{6,7,8}`
    /// (one-based label k maps to id k−1), uniform weights.
    pub fn fig_graphs_8() -> Self {
        Self::from_parents(&[None, Some(0), Some(0), Some(1), Some(1), Some(2), Some(2), Some(2)])
            .expect("valid")
    }

    /// Equivalent description, with every weight made explicit.
    pub fn to_description(&self) -> TreeDescription {
        TreeDescription {
            node_count: self.node_count(),
            root: self.root,
            edges: self
                .preorder()
                .into_iter()
                .filter_map(|v| {
                    self.parent[v.0].map(|p| Edge {
                        parent: p,
                        child: v,
                        weight: Some(self.weight_to_parent[v.0]),
                    })
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count()).map(NodeId)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.0 < self.node_count()
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v.0]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.0]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.children[v.0].is_empty()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// `w(v, parent(v))`, or `None` at the root.
    pub fn edge_weight_to_parent(&self, v: NodeId) -> Option<f64> {
        self.parent[v.0].map(|_| self.weight_to_parent[v.0])
    }

    /// `w(child, parent)` for an edge of the tree.
    pub fn edge_weight(&self, parent: NodeId, child: NodeId) -> Option<f64> {
        if self.contains(child) && self.parent[child.0] == Some(parent) {
            Some(self.weight_to_parent[child.0])
        } else {
            None
        }
    }

    /// Number of edges between the root and `v`.
    pub fn level(&self, v: NodeId) -> usize {
        self.level[v.0]
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        self.level.iter().copied().max().unwrap_or(0)
    }

    /// Depth-first order, ascending children, root first.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children[v.0].iter().rev());
        }
        out
    }

    /// Children before parents; the reverse of [`Self::preorder`].
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut order = self.preorder();
        order.reverse();
        order
    }

    /// Nodes on the path from the root down to `v`, root first.
    pub fn path_from_root(&self, v: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(v) {
            return Err(Error::UnknownNode(v));
        }
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent[cur.0] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    pub fn leaf_paths(&self) -> Vec<LeafPath> {
        self.leaves
            .iter()
            .map(|&leaf| LeafPath {
                leaf,
                nodes: self.path_from_root(leaf).expect("leaf is in tree"),
            })
            .collect()
    }

    /// `w(u, v)`: product of edge weights walking up from `u` to `v`.
    /// Requires `u` to be `v` or lie in the subtree below `v`.
    pub fn path_weight(&self, u: NodeId, v: NodeId) -> Result<f64> {
        for x in [u, v] {
            if !self.contains(x) {
                return Err(Error::UnknownNode(x));
            }
        }
        let mut w = 1.0;
        let mut cur = u;
        while cur != v {
            match self.parent[cur.0] {
                Some(p) => {
                    w *= self.weight_to_parent[cur.0];
                    cur = p;
                }
                None => return Err(Error::NotOnPath { u, v }),
            }
        }
        Ok(w)
    }

    /// `w(ℓ, r)` for every leaf, in leaf order.
    pub fn leaf_weights(&self) -> Vec<(NodeId, f64)> {
        self.leaves
            .iter()
            .map(|&l| (l, self.path_weight(l, self.root).expect("leaf below root")))
            .collect()
    }

    /// `V_vv = Σ_{ℓ ⪯ v} w(ℓ, r)` for every node, indexed by node id.
    pub fn cumulative_weights(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.node_count()];
        for (l, w) in self.leaf_weights() {
            acc[l.0] = w;
        }
        for v in self.postorder() {
            if !self.is_leaf(v) {
                acc[v.0] = self.children[v.0].iter().map(|c| acc[c.0]).sum();
            }
        }
        acc
    }

    pub fn node_cumulative_weight(&self, v: NodeId) -> Result<f64> {
        if !self.contains(v) {
            return Err(Error::UnknownNode(v));
        }
        Ok(self.cumulative_weights()[v.0])
    }
}
