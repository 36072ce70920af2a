//! JSON problem files.
//!
//! ```json
//! { "dimension": 2, "root": 0,
//!   "nodes": [{"id": 0, "rows": [[1, 1]], "b": [2]}, ...],
//!   "edges": [{"parent": 0, "child": 1, "weight": 0.5}, ...],
//!   "reference": [1, 1] }
//! ```
//!
//! Node ids are dense in `0..nodes.len()`. Omit every weight below a parent
//! for uniform weights. `reference` is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tree_kaczmarz::linalg::RowEquation;
use tree_kaczmarz::topology::{Edge, NodeId, TopologyViolation, TreeDescription, TreeTopology};
use tree_kaczmarz::{Error, TreeSystem};

use crate::error::{CliError, Issue, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub root: usize,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub rows: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub parent: usize,
    pub child: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// A checked problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub system: TreeSystem,
    pub reference: Option<Vec<f64>>,
}

impl ProblemFile {
    pub fn from_system(system: &TreeSystem, reference: Option<Vec<f64>>) -> Self {
        let tree = system.tree();
        let desc = tree.to_description();
        ProblemFile {
            dimension: system.dimension(),
            root: tree.root().index(),
            nodes: tree
                .nodes()
                .map(|v| {
                    let eqs = system.equations(v);
                    NodeSpec {
                        id: v.index(),
                        rows: eqs.iter().map(|e| e.coefficients().to_vec()).collect(),
                        b: eqs.iter().map(|e| e.rhs()).collect(),
                    }
                })
                .collect(),
            edges: desc
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    parent: e.parent.index(),
                    child: e.child.index(),
                    weight: e.weight,
                })
                .collect(),
            reference,
        }
    }

    /// Checks everything and reports every issue found, not just the first.
    pub fn into_problem(self) -> Result<Problem> {
        let n = self.nodes.len();
        let d = self.dimension;
        let mut issues = Vec::new();
        let mut slots: Vec<Option<&NodeSpec>> = vec![None; n];
        for spec in &self.nodes {
            match slots.get_mut(spec.id) {
                None => issues.push(Issue::NodeOutOfRange { node: spec.id, count: n }),
                Some(Some(_)) => issues.push(Issue::DuplicateNode { node: spec.id }),
                Some(slot) => *slot = Some(spec),
            }
        }
        for (id, s) in slots.iter().enumerate() {
            if s.is_none() {
                issues.push(Issue::MissingNode { node: id });
            }
        }

        let mut equations = Vec::with_capacity(n);
        for spec in slots.iter().flatten() {
            let node = spec.id;
            if spec.rows.is_empty() {
                issues.push(Issue::NoRows { node });
            }
            if spec.rows.len() != spec.b.len() {
                issues.push(Issue::RhsLength {
                    node,
                    rows: spec.rows.len(),
                    rhs: spec.b.len(),
                });
            }
            if spec.rows.iter().flatten().chain(&spec.b).any(|v| !v.is_finite()) {
                issues.push(Issue::NonFinite { node });
            }
            let mut eqs = Vec::new();
            for (row, (a, &b)) in spec.rows.iter().zip(&spec.b).enumerate() {
                if a.len() != d {
                    issues.push(Issue::DimensionMismatch {
                        node,
                        row,
                        expected: d,
                        found: a.len(),
                    });
                    continue;
                }
                match RowEquation::new(a.clone(), b) {
                    Ok(eq) => eqs.push(eq),
                    Err(Error::ZeroRow) => issues.push(Issue::ZeroRow { node, row }),
                    Err(_) => {}
                }
            }
            equations.push(eqs);
        }

        if let Some(r) = &self.reference {
            if r.len() != d {
                issues.push(Issue::ReferenceLength {
                    expected: d,
                    found: r.len(),
                });
            }
        }

        let desc = TreeDescription {
            node_count: n,
            root: NodeId(self.root),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    parent: NodeId(e.parent),
                    child: NodeId(e.child),
                    weight: e.weight,
                })
                .collect(),
        };
        let tree = match TreeTopology::new(&desc) {
            Ok(t) => Some(t),
            Err(Error::InvalidTree(violations)) => {
                issues.extend(violations.iter().map(|v| Issue::Tree(describe(v, &desc))));
                None
            }
            Err(e) => return Err(e.into()),
        };

        match tree {
            Some(tree) if issues.is_empty() => Ok(Problem {
                system: TreeSystem::new(tree, equations)?,
                reference: self.reference,
            }),
            _ => Err(CliError::Validation(issues)),
        }
    }
}

/// Violation text, with the offending edges spelled out for weight sums.
fn describe(v: &TopologyViolation, desc: &TreeDescription) -> String {
    match v {
        TopologyViolation::WeightsNotNormalized { parent, sum } => {
            let edges: Vec<String> = desc
                .edges
                .iter()
                .filter(|e| e.parent == *parent)
                .map(|e| match e.weight {
                    Some(w) => format!("{}->{} ({w})", e.parent, e.child),
                    None => format!("{}->{}", e.parent, e.child),
                })
                .collect();
            format!(
                "weights on edges {} sum to {sum}, not 1",
                edges.join(", ")
            )
        }
        other => other.to_string(),
    }
}

pub fn parse_problem(text: &str, path: &Path) -> Result<Problem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.into_problem()
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_problem(&text, path)
}

pub fn save_problem(path: &Path, system: &TreeSystem, reference: Option<&[f64]>) -> Result<()> {
    let file = ProblemFile::from_system(system, reference.map(<[f64]>::to_vec));
    let text = serde_json::to_string_pretty(&file).expect("problem files always serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}
