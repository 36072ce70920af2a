//! Reference solutions and closed forms that do not go through the solver.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, distance, dot, norm, pseudo_solve, row_space_basis, solve_square, ComplexScalar,
    Matrix, RowEquation, Vector, DEFAULT_RANK_TOL,
};
use crate::solver::TreeSystem;
use crate::sor::{fixed_point, SorSetup};
use crate::topology::{NodeId, TreeTopology};

/// Residual tolerance for declaring a system consistent.
pub const CONSISTENCY_TOL: f64 = 1e-9;
/// Row limit of [`brute_force_iterate`].
pub const BRUTE_FORCE_MAX_ROWS: usize = 32;

/// Solution of minimal Euclidean norm of a consistent system.
pub fn min_norm_solution(a: &Matrix, b: &[f64]) -> Result<Vector> {
    let x = pseudo_solve(a, b, DEFAULT_RANK_TOL)?;
    let mut r = a.mul_vec(&x)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
    let residual = norm(&r);
    if residual > CONSISTENCY_TOL * norm(b).max(1.0) {
        return Err(Error::Inconsistent { residual });
    }
    Ok(x)
}

/// Data of the functional `⟨D⁻¹V (b − Az), b − Az⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLsProblem {
    /// All rows, in node order.
    pub a: Matrix,
    pub b: Vector,
    /// `D_vv = ‖a_v‖²`
    pub d: Vector,
    /// `V_vv`: cumulative weight of the node owning the row.
    pub v: Vector,
}

impl WeightedLsProblem {
    pub fn from_system(system: &TreeSystem) -> Self {
        let (a, b, owner) = system.stacked();
        let cumulative = system.tree().cumulative_weights();
        let d = (0..a.rows()).map(|i| dot(a.row(i), a.row(i))).collect();
        let v = owner.iter().map(|n| cumulative[n.index()]).collect();
        WeightedLsProblem { a, b, d, v }
    }

    /// Value of the functional at `z`.
    pub fn functional(&self, z: &[f64]) -> Result<f64> {
        let az = self.a.mul_vec(z)?;
        Ok((0..self.b.len())
            .map(|i| {
                let r = self.b[i] - az[i];
                self.v[i] / self.d[i] * r * r
            })
            .sum())
    }

    /// `Aᵀ D⁻¹V (b − A z)`
    pub fn gradient(&self, z: &[f64]) -> Result<Vector> {
        let az = self.a.mul_vec(z)?;
        let wr: Vec<f64> = (0..self.b.len())
            .map(|i| self.v[i] / self.d[i] * (self.b[i] - az[i]))
            .collect();
        self.a.tr_mul_vec(&wr)
    }
}

/// Minimizer of the weighted functional over `R(Aᵀ)`.
pub fn weighted_ls_solution(problem: &WeightedLsProblem) -> Result<Vector> {
    let q = row_space_basis(&problem.a, DEFAULT_RANK_TOL);
    let r = q.cols();
    if r == 0 {
        return Ok(vec![0.0; problem.a.cols()]);
    }
    let m = problem.a.matmul(&q)?;
    let w: Vec<f64> = problem.v.iter().zip(&problem.d).map(|(v, d)| v / d).collect();
    let normal = Matrix::from_fn(r, r, |i, j| {
        (0..m.rows()).map(|k| m[(k, i)] * w[k] * m[(k, j)]).sum()
    });
    let rhs: Vec<f64> = (0..r)
        .map(|i| (0..m.rows()).map(|k| m[(k, i)] * w[k] * problem.b[k]).sum())
        .collect();
    let c = solve_square(&normal, &rhs)?;
    q.mul_vec(&c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaLimitReport {
    pub omegas: Vec<f64>,
    /// `‖x(ω) − x^LS‖` per ω.
    pub deviations: Vec<f64>,
    pub weighted_ls: Vector,
    /// Least-squares slope of `log deviation` against `log ω`; `None` when
    /// the deviations are all negligible.
    pub slope: Option<f64>,
    /// Deviation is `O(ω)`: slope at least 0.9, or no measurable deviation.
    pub linear: bool,
}

pub fn verify_omega_limit(system: &TreeSystem, omegas: &[f64]) -> Result<OmegaLimitReport> {
    if omegas.len() < 2 {
        return Err(Error::InvalidConfig("need at least two relaxation parameters"));
    }
    if omegas.iter().any(|&w| !(w > 0.0 && w < 2.0)) || omegas.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidConfig("relaxation parameters must decrease within (0, 2)"));
    }
    let x_ls = weighted_ls_solution(&WeightedLsProblem::from_system(system))?;
    let setup = SorSetup::new(system)?;
    let mut deviations = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let x = fixed_point(&setup.at(w)?)?;
        deviations.push(distance(&x, &x_ls));
    }

    let scale = norm(&x_ls).max(1.0);
    let slope = if deviations.iter().all(|&e| e <= CONSISTENCY_TOL * scale) {
        None
    } else {
        let pts: Vec<(f64, f64)> = omegas
            .iter()
            .zip(&deviations)
            .filter(|(_, &e)| e > 0.0)
            .map(|(&w, &e)| (libm::log(w), libm::log(e)))
            .collect();
        fit_slope(&pts)
    };
    let linear = match slope {
        None => deviations.iter().all(|&e| e <= CONSISTENCY_TOL * scale),
        Some(s) => s >= 0.9,
    };
    Ok(OmegaLimitReport {
        omegas: omegas.to_vec(),
        deviations,
        weighted_ls: x_ls,
        slope,
        linear,
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The two-line example: rows `(−sin α, cos α)` and `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example1Variant {
    /// Sequential projection onto both lines.
    Standard,
    /// Both projections from the same point, then averaged.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Config {
    pub alpha: f64,
    pub variant: Example1Variant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Optima {
    pub omega_opt: f64,
    pub rho_opt: f64,
    pub omega_limit: Option<f64>,
}

impl Example1Config {
    pub fn new(alpha: f64, variant: Example1Variant) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= FRAC_PI_2 + 1e-15) {
            return Err(Error::InvalidConfig("angle must lie in (0, pi/2]"));
        }
        Ok(Example1Config { alpha, variant })
    }

    fn sc(&self) -> (f64, f64) {
        (libm::sin(self.alpha), libm::cos(self.alpha))
    }

    /// The two rows.
    pub fn rows(&self) -> Matrix {
        let (s, c) = self.sc();
        Matrix::from_rows(&[[-s, c], [0.0, 1.0]]).expect("2x2")
    }

    /// Iteration matrix for relaxation `omega`.
    pub fn matrix(&self, omega: f64) -> Matrix {
        let (s, c) = self.sc();
        let w = omega;
        let rows = match self.variant {
            Example1Variant::Standard => [
                [1.0 - w * s * s, w * s * c],
                [w * (1.0 - w) * s * c, (1.0 - w) * (1.0 - w * c * c)],
            ],
            Example1Variant::Averaged => [
                [1.0 - 0.5 * w * s * s, 0.5 * w * s * c],
                [0.5 * w * s * c, 0.5 * w * s * s - w + 1.0],
            ],
        };
        Matrix::from_rows(&rows).expect("2x2")
    }

    pub fn eigenvalues(&self, omega: f64) -> [ComplexScalar; 2] {
        let (s, c) = self.sc();
        let w = omega;
        match self.variant {
            Example1Variant::Standard => {
                let mid = 1.0 - w + 0.5 * w * w * c * c;
                let k = 0.5 * w * c;
                let disc = (w - 2.0) * (w - 2.0) - w * w * s * s;
                let root = if disc >= 0.0 {
                    ComplexScalar::new(k * libm::sqrt(disc), 0.0)
                } else {
                    ComplexScalar::new(0.0, k * libm::sqrt(-disc))
                };
                let m = ComplexScalar::new(mid, 0.0);
                [m + root, m - root]
            }
            Example1Variant::Averaged => [
                ComplexScalar::new(1.0 + 0.5 * w * (c - 1.0), 0.0),
                ComplexScalar::new(1.0 + 0.5 * w * (-c - 1.0), 0.0),
            ],
        }
    }

    pub fn spectral_radius(&self, omega: f64) -> f64 {
        let [a, b] = self.eigenvalues(omega);
        a.norm().max(b.norm())
    }

    pub fn optima(&self) -> Example1Optima {
        let (s, c) = self.sc();
        match self.variant {
            Example1Variant::Standard => {
                let w = 2.0 / (1.0 + s);
                Example1Optima {
                    omega_opt: w,
                    rho_opt: w - 1.0,
                    omega_limit: Some(2.0),
                }
            }
            Example1Variant::Averaged => Example1Optima {
                omega_opt: 2.0,
                rho_opt: c,
                omega_limit: Some(4.0 / (1.0 + c)),
            },
        }
    }

    /// The averaged variant embedded in three unknowns: a root carrying
    /// `x₃ = 0` with two children carrying the two lines (padded with a zero
    /// third coefficient), weights ½. The leading 2×2 block of the tree's
    /// iteration matrix equals [`Example1Config::matrix`]; the third
    /// coordinate decouples with factor `1 − ω`.
    pub fn as_tree(&self) -> Result<TreeSystem> {
        if self.variant != Example1Variant::Averaged {
            return Err(Error::VariantUnsupported);
        }
        let (s, c) = self.sc();
        let eq = |a: [f64; 3]| RowEquation::new(a.to_vec(), 0.0).map(|e| vec![e]);
        TreeSystem::new(
            TreeTopology::star(2)?,
            vec![eq([0.0, 0.0, 1.0])?, eq([-s, c, 0.0])?, eq([0.0, 1.0, 0.0])?],
        )
    }
}

pub fn example1_eigenvalues(cfg: &Example1Config, omega: f64) -> Result<[ComplexScalar; 2]> {
    if !(omega > 0.0) {
        return Err(Error::InvalidConfig("relaxation parameter must be positive"));
    }
    Ok(cfg.eigenvalues(omega))
}

pub fn example1_optima(cfg: &Example1Config) -> Example1Optima {
    cfg.optima()
}

pub fn example1_as_tree(cfg: &Example1Config) -> Result<TreeSystem> {
    cfg.as_tree()
}

/// One iteration computed by materializing every projection as an explicit
/// affine map, composing along each root-to-leaf path and mixing with the
/// leaf weights.
pub fn brute_force_iterate(system: &TreeSystem, omega: f64, x: &[f64]) -> Result<Vector> {
    let rows = system.total_rows();
    if rows > BRUTE_FORCE_MAX_ROWS {
        return Err(Error::TooLarge {
            rows,
            limit: BRUTE_FORCE_MAX_ROWS,
        });
    }
    let d = system.dimension();
    crate::linalg::check_dim(d, x.len())?;
    let tree = system.tree();
    let mut out = vec![0.0; d];
    for (leaf, w) in tree.leaf_weights() {
        let (m, t) = path_map(system, leaf, omega)?;
        let mut y = m.mul_vec(x)?;
        axpy(1.0, &t, &mut y);
        axpy(w, &y, &mut out);
    }
    Ok(out)
}

fn path_map(system: &TreeSystem, leaf: NodeId, omega: f64) -> Result<(Matrix, Vector)> {
    let d = system.dimension();
    let mut m = Matrix::identity(d);
    let mut t = vec![0.0; d];
    for eq in system.path_rows(leaf)? {
        let a = eq.coefficients();
        let n2 = eq.norm_sq();
        let q = Matrix::from_fn(d, d, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - omega * a[i] * a[j] / n2
        });
        m = q.matmul(&m)?;
        t = q.mul_vec(&t)?;
        axpy(omega * eq.rhs() / n2, a, &mut t);
    }
    Ok((m, t))
}
