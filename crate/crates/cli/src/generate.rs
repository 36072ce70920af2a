//! Random test matrices and the trees they are spread over.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tree_kaczmarz::linalg::{norm, Matrix, Vector};
use tree_kaczmarz::topology::TreeTopology;
use tree_kaczmarz::TreeSystem;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixKind {
    /// Random orthogonal, truncated toward zero to one decimal.
    AlmostOrthogonal,
    /// i.i.d. standard normal entries.
    Normal,
    /// i.i.d. uniform entries on [-1, 1].
    Uniform,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 3] = [MatrixKind::AlmostOrthogonal, MatrixKind::Normal, MatrixKind::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::AlmostOrthogonal => "almost_orthogonal",
            MatrixKind::Normal => "normal",
            MatrixKind::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeShape {
    Chain,
    Fig3,
    Fig8,
    Custom(TreeTopology),
}

impl TreeShape {
    /// Tree for an `n × n` matrix with one row per node.
    pub fn build(&self, n: usize) -> Result<TreeTopology> {
        let (tree, expected) = match self {
            TreeShape::Chain => (TreeTopology::chain(n)?, n),
            TreeShape::Fig3 => (TreeTopology::fig_graphs_3(), 3),
            TreeShape::Fig8 => (TreeTopology::fig_graphs_8(), 8),
            TreeShape::Custom(t) => (t.clone(), t.node_count()),
        };
        if expected != n {
            return Err(CliError::SizeMismatch { tree: expected, rows: n });
        }
        Ok(tree)
    }
}

/// Truncation toward zero at the first decimal.
pub fn truncate_one_decimal(x: f64) -> f64 {
    (x.abs() * 10.0).floor().copysign(x) / 10.0
}

/// Haar-distributed orthogonal matrix: Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let mut q: Vec<Vector> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v: Vector = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            // twice is enough
            for _ in 0..2 {
                for u in &q {
                    let c: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
                }
            }
            let nv = norm(&v);
            if nv < 1e-8 {
                break;
            }
            q.push(v.into_iter().map(|x| x / nv).collect());
        }
        if q.len() == n {
            return Matrix::from_rows(&q).expect("square");
        }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, kind: MatrixKind, n: usize) -> Matrix {
    match kind {
        MatrixKind::Normal => Matrix::from_fn(n, n, |_, _| rng.sample(StandardNormal)),
        MatrixKind::Uniform => Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)),
        MatrixKind::AlmostOrthogonal => loop {
            let q = random_orthogonal(rng, n);
            let t = Matrix::from_fn(n, n, |i, j| truncate_one_decimal(q[(i, j)]));
            if (0..n).all(|i| t.row(i).iter().any(|&v| v != 0.0)) {
                break t;
            }
        },
    }
}

/// Unit-norm random direction.
pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let g: Vector = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let ng = norm(&g);
        if ng > 1e-8 {
            return g.into_iter().map(|v| v / ng).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub system: TreeSystem,
    pub matrix: Matrix,
    pub rhs: Vector,
    /// Unit-norm solution with `rhs = matrix · x_true`.
    pub x_true: Vector,
}

/// Square `n × n` instance on the given shape, one row per node.
pub fn generate_with(rng: &mut ChaCha8Rng, kind: MatrixKind, shape: &TreeShape, n: usize) -> Result<Generated> {
    let tree = shape.build(n)?;
    let matrix = random_matrix(rng, kind, n);
    let x_true = unit_vector(rng, n);
    let rhs = matrix.mul_vec(&x_true)?;
    let system = TreeSystem::one_row_per_node(tree, &matrix, &rhs)?;
    Ok(Generated {
        system,
        matrix,
        rhs,
        x_true,
    })
}

pub fn generate(kind: MatrixKind, shape: &TreeShape, n: usize, seed: u64) -> Result<Generated> {
    generate_with(&mut ChaCha8Rng::seed_from_u64(seed), kind, shape, n)
}
