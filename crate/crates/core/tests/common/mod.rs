#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tree_kaczmarz::linalg::{Matrix, RowEquation};
use tree_kaczmarz::topology::{Edge, NodeId, TreeDescription, TreeTopology};
use tree_kaczmarz::TreeSystem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random rooted tree on `n` nodes; node 0 is the root and every other node
/// hangs below a lower id. Weights are uniform or random, at even odds.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> TreeTopology {
    let parents: Vec<usize> = (1..n).map(|c| rng.random_range(0..c)).collect();
    let weighted = rng.random_bool(0.5);
    let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    if weighted {
        let mut sums = vec![0.0; n];
        for (i, &p) in parents.iter().enumerate() {
            sums[p] += raw[i + 1];
        }
        for (i, &p) in parents.iter().enumerate() {
            raw[i + 1] /= sums[p];
        }
    }
    let edges = parents
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if weighted {
                Edge::weighted(p, i + 1, raw[i + 1])
            } else {
                Edge::new(p, i + 1)
            }
        })
        .collect();
    TreeTopology::new(&TreeDescription {
        node_count: n,
        root: NodeId(0),
        edges,
    })
    .expect("generated tree is valid")
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub nodes: usize,
    pub dim: usize,
    pub max_rows: usize,
    /// Rows are drawn from a random subspace of this dimension.
    pub rank: Option<usize>,
    pub consistent: bool,
}

impl Shape {
    pub fn random(rng: &mut ChaCha8Rng, max_nodes: usize, max_dim: usize) -> Self {
        let dim = rng.random_range(1..=max_dim);
        Shape {
            nodes: rng.random_range(1..=max_nodes),
            dim,
            max_rows: rng.random_range(1..=2),
            rank: rng.random_bool(0.3).then(|| rng.random_range(1..=dim)),
            consistent: rng.random_bool(0.5),
        }
    }
}

fn random_row(rng: &mut ChaCha8Rng, basis: &Option<Vec<Vec<f64>>>, dim: usize) -> Vec<f64> {
    loop {
        let row: Vec<f64> = match basis {
            None => (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Some(g) => {
                let mut r = vec![0.0; dim];
                for gk in g {
                    let c: f64 = rng.random_range(-1.0..1.0);
                    r.iter_mut().zip(gk).for_each(|(ri, gi)| *ri += c * gi);
                }
                r
            }
        };
        if row.iter().map(|v| v * v).sum::<f64>() > 0.04 {
            return row;
        }
    }
}

pub fn random_system(rng: &mut ChaCha8Rng, shape: Shape) -> TreeSystem {
    let tree = random_tree(rng, shape.nodes);
    let basis = shape.rank.map(|r| {
        (0..r)
            .map(|_| loop {
                let g: Vec<f64> = (0..shape.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.1 {
                    break g.into_iter().map(|v| v / n).collect();
                }
            })
            .collect::<Vec<Vec<f64>>>()
    });
    let x_true: Vec<f64> = (0..shape.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let equations = (0..shape.nodes)
        .map(|_| {
            let k = rng.random_range(1..=shape.max_rows);
            (0..k)
                .map(|_| {
                    let a = random_row(rng, &basis, shape.dim);
                    let mut b: f64 = a.iter().zip(&x_true).map(|(p, q)| p * q).sum();
                    if !shape.consistent {
                        b += rng.random_range(-1.0..1.0);
                    }
                    RowEquation::new(a, b).unwrap()
                })
                .collect()
        })
        .collect();
    TreeSystem::new(tree, equations).unwrap()
}

/// Square, full-rank system with one row per node on a random tree.
pub fn unique_system(rng: &mut ChaCha8Rng, n: usize) -> TreeSystem {
    loop {
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sv = tree_kaczmarz::linalg::singular_values(&a);
        if sv[n - 1] > 0.1 * sv[0] {
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tree = random_tree(rng, n);
            return TreeSystem::one_row_per_node(tree, &a, &b).unwrap();
        }
    }
}

pub fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
}
