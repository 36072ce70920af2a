//! Dense real vectors and matrices, single-row projections and the small
//! dense kernels (eigenvalues, SVD, pseudo-inverse) the rest of the crate
//! is built on.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. Matrices are row-major.

mod eigen;
mod lu;
mod svd;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};


use crate::error::{Error, Result};

pub use eigen::{eigenvalues, spectral_radius, ComplexScalar};
pub use lu::solve_square;
pub use svd::{pseudo_solve, row_space_basis, singular_values, DEFAULT_RANK_TOL};

pub type Vector = Vec<f64>;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vector> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vector> {
        check_dim(self.rows, x.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out.row_mut(i));
            }
        }
        Ok(out)
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) -> Result<()> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        self.transpose().norm_inf()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Top-left `r x c` block.
    pub fn block(&self, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// One equation `a · x = b`, with `‖a‖²` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct RowEquation {
    a: Vector,
    b: f64,
    norm_sq: f64,
}

impl RowEquation {
    /// Fails with [`Error::ZeroRow`] for an all-zero row and
    /// [`Error::NonFinite`] for NaN or infinite coefficients.
    pub fn new(a: Vector, b: f64) -> Result<Self> {
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm_sq = dot(&a, &a);
        if norm_sq == 0.0 {
            return Err(Error::ZeroRow);
        }
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(RowEquation { a, b, norm_sq })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    pub fn rhs(&self) -> f64 {
        self.b
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }
}

pub fn apply_row(eq: &RowEquation, z: &[f64]) -> Result<f64> {
    check_dim(eq.dim(), z.len())?;
    Ok(dot(&eq.a, z))
}

/// `b − a·z`
pub fn residual(eq: &RowEquation, z: &[f64]) -> Result<f64> {
    Ok(eq.b - apply_row(eq, z)?)
}

/// Relaxed Kaczmarz step `z + ω (b − a·z)/‖a‖² · a`.
pub fn kaczmarz_update(eq: &RowEquation, z: &[f64], omega: f64) -> Result<Vector> {
    let mut out = z.to_vec();
    kaczmarz_update_in_place(eq, &mut out, omega)?;
    Ok(out)
}

pub(crate) fn kaczmarz_update_in_place(eq: &RowEquation, z: &mut [f64], omega: f64) -> Result<()> {
    let step = omega * residual(eq, z)? / eq.norm_sq;
    axpy(step, &eq.a, z);
    Ok(())
}

/// Orthogonal projection onto the null space of the row functional.
pub fn linear_projection(eq: &RowEquation, z: &[f64]) -> Result<Vector> {
    let coef = apply_row(eq, z)? / eq.norm_sq;
    let mut out = z.to_vec();
    axpy(-coef, &eq.a, &mut out);
    Ok(out)
}

/// Affine projection onto the hyperplane `a·z = b`.
pub fn affine_projection(eq: &RowEquation, z: &[f64]) -> Result<Vector> {
    let mut out = linear_projection(eq, z)?;
    axpy(eq.b / eq.norm_sq, &eq.a, &mut out);
    Ok(out)
}
