//! One-sided Jacobi SVD and the row-space / pseudo-inverse routines built
//! on top of it.

use alloc::vec;
use alloc::vec::Vec;


use super::{axpy, check_dim, dot, Matrix, Vector};

/// Relative singular-value threshold used for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// Thin SVD pieces: `a · v = u_scaled` where column `j` of `u_scaled` has
/// norm `sigma[j]` and `v` is orthogonal.
struct Jacobi {
    u_scaled: Matrix,
    v: Matrix,
    sigma: Vec<f64>,
}

fn jacobi_svd(a: &Matrix) -> Jacobi {
    let (m, n) = (a.rows(), a.cols());
    // column-major working copies: columns are contiguous
    let mut u: Vec<Vector> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vector> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma = u.iter().map(|col| libm::sqrt(dot(col, col))).collect();
    let mut u_scaled = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    for j in 0..n {
        u_scaled.set_column(j, &u[j]);
        vm.set_column(j, &v[j]);
    }
    Jacobi {
        u_scaled,
        v: vm,
        sigma,
    }
}

fn rotate(cols: &mut [Vector], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let mut s = jacobi_svd(a).sigma;
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    s
}

fn kept(sigma: &[f64], tol: f64) -> Vec<usize> {
    let smax = sigma.iter().fold(0.0, |m: f64, &s| m.max(s));
    if smax == 0.0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..sigma.len())
        .filter(|&j| sigma[j] > tol * smax)
        .collect();
    idx.sort_by(|&x, &y| {
        sigma[y]
            .partial_cmp(&sigma[x])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    idx
}

/// Orthonormal basis of the row space `R(Aᵀ)` as the columns of a
/// `cols(A) x rank` matrix. Rank is counted at `tol · σ_max`.
pub fn row_space_basis(a: &Matrix, tol: f64) -> Matrix {
    let svd = jacobi_svd(a);
    let idx = kept(&svd.sigma, tol);
    let n = a.cols();
    let mut basis = Matrix::zeros(n, idx.len());
    for (k, &j) in idx.iter().enumerate() {
        basis.set_column(k, &svd.v.column(j));
    }
    basis
}

/// Minimal-norm least-squares solution `A⁺ · rhs`.
pub fn pseudo_solve(a: &Matrix, rhs: &[f64], tol: f64) -> crate::error::Result<Vector> {
    check_dim(a.rows(), rhs.len())?;
    let svd = jacobi_svd(a);
    let mut x = vec![0.0; a.cols()];
    for j in kept(&svd.sigma, tol) {
        let s2 = svd.sigma[j] * svd.sigma[j];
        let coef = dot(&svd.u_scaled.column(j), rhs) / s2;
        axpy(coef, &svd.v.column(j), &mut x);
    }
    Ok(x)
}
