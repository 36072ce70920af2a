use alloc::vec::Vec;

use super::{check_dim, Matrix, Vector};
use crate::error::{Error, Result};

/// Solves `m · x = rhs` for square `m` by Gaussian elimination with partial
/// pivoting, followed by one step of iterative refinement.
pub fn solve_square(m: &Matrix, rhs: &[f64]) -> Result<Vector> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    check_dim(m.rows(), rhs.len())?;
    let lu = Lu::factor(m)?;
    let mut x = lu.solve(rhs);
    let r: Vec<f64> = m
        .mul_vec(&x)?
        .iter()
        .zip(rhs)
        .map(|(ax, b)| b - ax)
        .collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    Ok(x)
}

struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &Matrix) -> Result<Self> {
        let n = m.rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.max_abs();
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            if pmax <= f64::EPSILON * scale * n as f64 || pmax == 0.0 {
                return Err(Error::Singular);
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    fn solve(&self, rhs: &[f64]) -> Vector {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}
