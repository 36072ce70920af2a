//! SOR-form iteration operators.
//!
//! Along the root-to-leaf path of leaf `ℓ` the dispersion stage is a cyclic
//! relaxed Kaczmarz sweep over the stacked rows `S_ℓ`, so
//!
//! ```text
//! x_ℓ = B_ℓ x + b_ℓ,   B_ℓ = I − ω S_ℓᵀ (D_ℓ + ω L_ℓ)⁻¹ S_ℓ,   b_ℓ = ω S_ℓᵀ (D_ℓ + ω L_ℓ)⁻¹ b_ℓ
//! ```
//!
//! with `D_ℓ` the diagonal of row norms squared and `L_ℓ` the strictly lower
//! Gram part. Pooling makes one iteration `x ↦ B x + b` with
//! `B = Σ_ℓ w(ℓ,r) B_ℓ`. `(D_ℓ + ω L_ℓ)⁻¹` is only ever applied by forward
//! substitution.
//!
//! The row space `R(Aᵀ)` is invariant under `B`; [`SorOperators`] carries an
//! orthonormal basis for it and the restriction `B̂ = Qᵀ B Q`, whose spectral
//! radius governs convergence.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, check_dim, dot, norm, row_space_basis, solve_square, spectral_radius, Matrix, Vector,
    DEFAULT_RANK_TOL,
};
use crate::solver::TreeSystem;
use crate::topology::NodeId;

pub const DEFAULT_SWEEP_STEP: f64 = 0.005;
/// Default upper end of the ω search.
pub const DEFAULT_OMEGA_MAX: f64 = 4.0;
/// Resolution of the golden-section and bisection refinements.
pub const REFINE_TOL: f64 = 1e-6;
/// Tolerance of the fixed-point residual check.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Radii within this distance of one are treated as non-contracting.
pub const UNIT_RADIUS_TOL: f64 = 1e-12;

/// Path operators for one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafOperators {
    pub leaf: NodeId,
    /// `w(ℓ, r)`
    pub weight: f64,
    /// Stacked path rows, root first (`p × d`).
    pub rows: Matrix,
    pub rhs: Vector,
    /// Diagonal of `D_ℓ`: `‖a_{ℓ,j}‖²`.
    pub diag: Vector,
    /// `L_ℓ`: entries `a_{ℓ,i} · a_{ℓ,j}` for `i > j`, zero elsewhere (`p × p`).
    pub lower: Matrix,
}

impl LeafOperators {
    pub fn path_len(&self) -> usize {
        self.rows.rows()
    }

    pub fn diag_matrix(&self) -> Matrix {
        Matrix::diagonal(&self.diag)
    }

    /// Solves `(D_ℓ + ω L_ℓ) u = v` by forward substitution.
    pub fn forward_solve(&self, omega: f64, v: &[f64]) -> Vector {
        let p = self.path_len();
        let mut u = vec![0.0; p];
        for i in 0..p {
            let s: f64 = (0..i).map(|j| self.lower[(i, j)] * u[j]).sum();
            u[i] = (v[i] - omega * s) / self.diag[i];
        }
        u
    }

    /// `(B_ℓ^ω, b_ℓ^ω)`
    pub fn iteration(&self, omega: f64) -> (Matrix, Vector) {
        let (p, d) = (self.rows.rows(), self.rows.cols());
        // M = (D + ωL)⁻¹ S, column by column
        let mut m = Matrix::zeros(p, d);
        for j in 0..d {
            m.set_column(j, &self.forward_solve(omega, &self.rows.column(j)));
        }
        let mut b = Matrix::identity(d);
        let st_m = self.rows.transpose().matmul(&m).expect("shapes agree");
        b.add_scaled(-omega, &st_m).expect("shapes agree");

        let u = self.forward_solve(omega, &self.rhs);
        let mut off = self.rows.tr_mul_vec(&u).expect("shapes agree");
        off.iter_mut().for_each(|v| *v *= omega);
        (b, off)
    }

    /// `S_ℓᵀ (D_ℓ + ω L_ℓ)⁻¹ (b_ℓ − S_ℓ x)`
    fn correction(&self, omega: f64, x: &[f64]) -> Vector {
        let r: Vec<f64> = (0..self.path_len())
            .map(|i| self.rhs[i] - dot(self.rows.row(i), x))
            .collect();
        let u = self.forward_solve(omega, &r);
        self.rows.tr_mul_vec(&u).expect("shapes agree")
    }
}

pub fn build_leaf_operators(system: &TreeSystem, leaf: NodeId) -> Result<LeafOperators> {
    let tree = system.tree();
    if !tree.contains(leaf) {
        return Err(Error::UnknownNode(leaf));
    }
    if !tree.is_leaf(leaf) {
        return Err(Error::NotALeaf(leaf));
    }
    let path = system.path_rows(leaf)?;
    let p = path.len();
    let rows = Matrix::from_rows(&path.iter().map(|e| e.coefficients()).collect::<Vec<_>>())?;
    let rhs = path.iter().map(|e| e.rhs()).collect();
    let diag: Vector = path.iter().map(|e| e.norm_sq()).collect();
    assert!(diag.iter().all(|&d| d > 0.0), "rows are non-zero by construction");
    let lower = Matrix::from_fn(p, p, |i, j| {
        if i > j {
            dot(rows.row(i), rows.row(j))
        } else {
            0.0
        }
    });
    Ok(LeafOperators {
        leaf,
        weight: tree.path_weight(leaf, tree.root())?,
        rows,
        rhs,
        diag,
        lower,
    })
}

/// ω-independent data: per-leaf path operators and the row-space basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SorSetup {
    pub leaves: Vec<LeafOperators>,
    pub basis: Matrix,
    dimension: usize,
}

impl SorSetup {
    pub fn new(system: &TreeSystem) -> Result<Self> {
        Self::with_rank_tol(system, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(system: &TreeSystem, rank_tol: f64) -> Result<Self> {
        let leaves = system
            .tree()
            .leaves()
            .iter()
            .map(|&l| build_leaf_operators(system, l))
            .collect::<Result<Vec<_>>>()?;
        let (a, _, _) = system.stacked();
        Ok(SorSetup {
            leaves,
            basis: row_space_basis(&a, rank_tol),
            dimension: system.dimension(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// `(B^ω, b^ω)` as the weighted sum over leaves, in leaf order.
    pub fn combined(&self, omega: f64) -> (Vec<(Matrix, Vector)>, Matrix, Vector) {
        let d = self.dimension;
        let mut b = Matrix::zeros(d, d);
        let mut off = vec![0.0; d];
        let mut per_leaf = Vec::with_capacity(self.leaves.len());
        for l in &self.leaves {
            let (bl, ol) = l.iteration(omega);
            b.add_scaled(l.weight, &bl).expect("shapes agree");
            axpy(l.weight, &ol, &mut off);
            per_leaf.push((bl, ol));
        }
        (per_leaf, b, off)
    }

    pub fn at(&self, omega: f64) -> Result<SorOperators> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidConfig("relaxation parameter must be positive"));
        }
        let (per_leaf, matrix, offset) = self.combined(omega);
        let (restricted, rho_hat) = restrict(&matrix, &self.basis)?;
        Ok(SorOperators {
            omega,
            leaf_matrices: per_leaf,
            matrix,
            offset,
            basis: self.basis.clone(),
            restricted,
            rho_hat,
            leaves: self.leaves.clone(),
        })
    }

    /// `ρ(B̂^ω)` without keeping the operators.
    pub fn restricted_radius(&self, omega: f64) -> Result<f64> {
        let (_, matrix, _) = self.combined(omega);
        Ok(restrict(&matrix, &self.basis)?.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SorOperators {
    pub omega: f64,
    /// `(B_ℓ^ω, b_ℓ^ω)` in leaf order.
    pub leaf_matrices: Vec<(Matrix, Vector)>,
    /// `B^ω`
    pub matrix: Matrix,
    /// `b^ω`
    pub offset: Vector,
    /// Orthonormal columns spanning `R(Aᵀ)`.
    pub basis: Matrix,
    /// `B̂^ω = Qᵀ B^ω Q`
    pub restricted: Matrix,
    pub rho_hat: f64,
    pub leaves: Vec<LeafOperators>,
}

pub fn build_sor(system: &TreeSystem, omega: f64) -> Result<SorOperators> {
    SorSetup::new(system)?.at(omega)
}

/// `B·x + b`
pub fn iterate_via_sor(ops: &SorOperators, x: &[f64]) -> Result<Vector> {
    let mut out = ops.matrix.mul_vec(x)?;
    axpy(1.0, &ops.offset, &mut out);
    Ok(out)
}

/// `Qᵀ M Q` and its spectral radius.
pub fn restrict(matrix: &Matrix, basis: &Matrix) -> Result<(Matrix, f64)> {
    check_dim(matrix.cols(), basis.rows())?;
    let restricted = basis.transpose().matmul(&matrix.matmul(basis)?)?;
    let rho = spectral_radius(&restricted)?;
    Ok((restricted, rho))
}

/// The limit `x(ω) ∈ R(Aᵀ)` of the iteration, i.e. the fixed point of
/// `z ↦ B̂ z + b` on the row space.
pub fn fixed_point(ops: &SorOperators) -> Result<Vector> {
    if !(ops.rho_hat < 1.0 - UNIT_RADIUS_TOL) {
        return Err(Error::SpectralRadiusAtLeastOne(ops.rho_hat));
    }
    let q = &ops.basis;
    let r = q.cols();
    let mut lhs = Matrix::identity(r);
    lhs.add_scaled(-1.0, &ops.restricted)?;
    let rhs = q.tr_mul_vec(&ops.offset)?;
    let c = solve_square(&lhs, &rhs)?;
    let x = q.mul_vec(&c)?;

    let res = fixed_point_residual(ops, &x);
    let bx = ops.matrix.mul_vec(&x)?;
    let scale = (norm(&ops.offset) + norm(&x) + norm(&bx)) / ops.omega;
    if !(res <= FIXED_POINT_TOL * scale.max(1.0)) {
        return Err(Error::FixedPointResidual(res));
    }
    Ok(x)
}

/// `‖Σ_ℓ w(ℓ,r) S_ℓᵀ (D_ℓ + ω L_ℓ)⁻¹ (b_ℓ − S_ℓ x)‖`, computed leaf by leaf.
/// Vanishes exactly at `x(ω)`.
pub fn fixed_point_residual(ops: &SorOperators, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    for l in &ops.leaves {
        axpy(l.weight, &l.correction(ops.omega, x), &mut g);
    }
    norm(&g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSweep {
    /// `(ω, ρ(B̂^ω))` on the uniform grid.
    pub grid: Vec<(f64, f64)>,
    pub omega_opt: f64,
    pub rho_opt: f64,
    /// First crossing of `ρ = 1` above `omega_opt`; the top of the search
    /// range if there is none; `None` if `ρ ≥ 1` everywhere.
    pub omega_limit: Option<f64>,
    /// `ρ < 1` at the top of the searched range.
    pub capped: bool,
    /// `ρ` dropped back below 1 on the grid after the first crossing.
    pub reentry: bool,
}

/// Sweeps `ρ(B̂^ω)` for the system over `ω ∈ (0, omega_max]`.
pub fn omega_sweep(system: &TreeSystem, omega_max: f64, grid_step: f64) -> Result<OmegaSweep> {
    let setup = SorSetup::new(system)?;
    sweep_radius(|w| setup.restricted_radius(w), omega_max, grid_step)
}

/// Grid search of an arbitrary spectral-radius curve, refined by
/// golden-section around the best grid point and bisection at the
/// first `ρ = 1` crossing.
pub fn sweep_radius<F>(mut rho: F, omega_max: f64, grid_step: f64) -> Result<OmegaSweep>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(grid_step > 0.0) || !(omega_max >= grid_step) {
        return Err(Error::InvalidConfig("need 0 < grid_step <= omega_max"));
    }
    let count = libm::floor((omega_max / grid_step) + 1e-9) as usize;
    let mut grid = Vec::with_capacity(count);
    for k in 1..=count {
        let w = k as f64 * grid_step;
        grid.push((w, rho(w)?));
    }

    let best = grid
        .iter()
        .enumerate()
        .fold(0, |b, (i, g)| if g.1 < grid[b].1 { i } else { b });
    let lo = if best == 0 { grid[0].0 * 1e-3 } else { grid[best - 1].0 };
    let hi = grid.get(best + 1).map_or(grid[best].0, |g| g.0);
    let (mut omega_opt, mut rho_opt) = golden_section(&mut rho, lo, hi)?;
    if rho_opt > grid[best].1 {
        omega_opt = grid[best].0;
        rho_opt = grid[best].1;
    }

    let mut omega_limit = None;
    let mut reentry = false;
    let capped = grid.last().is_some_and(|g| g.1 < 1.0);
    if rho_opt < 1.0 {
        match (best..grid.len()).find(|&i| grid[i].1 >= 1.0) {
            None => omega_limit = Some(grid[grid.len() - 1].0),
            Some(j) => {
                let mut a = if j == best { omega_opt } else { grid[j - 1].0 };
                let mut b = grid[j].0;
                while b - a > REFINE_TOL {
                    let m = 0.5 * (a + b);
                    if rho(m)? < 1.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                omega_limit = Some(0.5 * (a + b));
                reentry = grid[j..].iter().any(|g| g.1 < 1.0);
            }
        }
    }

    Ok(OmegaSweep {
        grid,
        omega_opt,
        rho_opt,
        omega_limit,
        capped,
        reentry,
    })
}

fn golden_section<F>(f: &mut F, mut a: f64, mut b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > REFINE_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let m = 0.5 * (a + b);
    Ok((m, f(m)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RowEquation;
    use crate::solver::iterate;
    use crate::topology::TreeTopology;
    use approx::assert_abs_diff_eq;

    fn row(a: &[f64], b: f64) -> Vec<RowEquation> {
        vec![RowEquation::new(a.to_vec(), b).unwrap()]
    }

    fn scalar_chain() -> TreeSystem {
        TreeSystem::new(
            TreeTopology::chain(2).unwrap(),
            vec![row(&[1.0], 0.0), row(&[1.0], 1.0)],
        )
        .unwrap()
    }

    fn single_equation() -> TreeSystem {
        TreeSystem::new(TreeTopology::single(), vec![row(&[1.0, 1.0], 2.0)]).unwrap()
    }

    #[test]
    fn leaf_operators_chain() {
        let ops = build_leaf_operators(&scalar_chain(), NodeId(1)).unwrap();
        assert_eq!(ops.rows.as_slice(), &[1.0, 1.0]);
        assert_eq!(ops.diag_matrix(), Matrix::identity(2));
        assert_eq!(ops.lower.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(ops.weight, 1.0);
        assert_eq!(
            build_leaf_operators(&scalar_chain(), NodeId(0)),
            Err(Error::NotALeaf(NodeId(0)))
        );
    }

    #[test]
    fn leaf_operators_orthogonal_and_single() {
        let sys = TreeSystem::new(
            TreeTopology::chain(2).unwrap(),
            vec![row(&[1.0, 0.0], 0.0), row(&[0.0, 1.0], 0.0)],
        )
        .unwrap();
        let ops = build_leaf_operators(&sys, NodeId(1)).unwrap();
        assert!(ops.lower.as_slice().iter().all(|&v| v == 0.0));

        let sys = TreeSystem::new(TreeTopology::single(), vec![row(&[3.0, 4.0], 1.0)]).unwrap();
        let ops = build_leaf_operators(&sys, NodeId(0)).unwrap();
        assert_eq!(ops.rows.as_slice(), &[3.0, 4.0]);
        assert_eq!(ops.diag, vec![25.0]);
        assert_eq!(ops.lower.as_slice(), &[0.0]);
    }

    #[test]
    fn chain_operators_closed_form() {
        for omega in [0.25, 0.5, 1.0, 1.5, 1.9] {
            let ops = build_sor(&scalar_chain(), omega).unwrap();
            assert_abs_diff_eq!(ops.matrix[(0, 0)], 1.0 - omega * (2.0 - omega), epsilon = 1e-15);
            assert_abs_diff_eq!(ops.offset[0], omega, epsilon = 1e-15);
            assert_abs_diff_eq!(ops.rho_hat, (1.0 - omega).powi(2), epsilon = 1e-15);
        }
        let ops = build_sor(&scalar_chain(), 1.0).unwrap();
        assert_eq!(ops.rho_hat, 0.0);
    }

    #[test]
    fn small_omega_approaches_identity() {
        let sys = crate::solver::tests_support::worked_example();
        let ops = build_sor(&sys, 1e-6).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ops.matrix[(i, j)] - e).abs() <= 1e-4);
            }
            assert!(ops.offset[i].abs() <= 1e-4);
        }
    }

    #[test]
    fn iterate_via_sor_matches_worked_example() {
        let sys = crate::solver::tests_support::worked_example();
        let ops = build_sor(&sys, 1.0).unwrap();
        let out = iterate_via_sor(&ops, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(out[0], 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.75, epsilon = 1e-15);
        assert_eq!(iterate_via_sor(&ops, &[0.0, 0.0]).unwrap(), ops.offset);
        let fp = iterate_via_sor(&ops, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(fp[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fp[1], 1.0, epsilon = 1e-15);
        let x = [0.3, -1.7];
        let a = iterate(&sys, 1.0, &x).unwrap();
        let b = iterate_via_sor(&ops, &x).unwrap();
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-14);
        assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-14);
    }

    #[test]
    fn restrict_examples() {
        // full rank: restriction is a rotation of B
        let sys = crate::solver::tests_support::worked_example();
        let ops = build_sor(&sys, 1.3).unwrap();
        assert_eq!(ops.basis.cols(), 2);
        assert_abs_diff_eq!(
            ops.rho_hat,
            spectral_radius(&ops.matrix).unwrap(),
            epsilon = 1e-12
        );

        // single equation: B̂ = [1 − ω]
        for omega in [0.3, 1.0, 1.7] {
            let ops = build_sor(&single_equation(), omega).unwrap();
            assert_eq!(ops.restricted.rows(), 1);
            assert_abs_diff_eq!(ops.restricted[(0, 0)], 1.0 - omega, epsilon = 1e-15);
            assert_abs_diff_eq!(ops.rho_hat, (1.0 - omega).abs(), epsilon = 1e-15);
        }
    }

    #[test]
    fn fixed_point_examples() {
        for (omega, expect) in [(0.5, 2.0 / 3.0), (1.0, 1.0)] {
            let ops = build_sor(&scalar_chain(), omega).unwrap();
            assert_abs_diff_eq!(fixed_point(&ops).unwrap()[0], expect, epsilon = 1e-15);
        }
        for omega in [0.2, 1.0, 1.8] {
            let ops = build_sor(&single_equation(), omega).unwrap();
            let x = fixed_point(&ops).unwrap();
            assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
        }
        let ops = build_sor(&single_equation(), 2.0).unwrap();
        assert!(matches!(fixed_point(&ops), Err(Error::SpectralRadiusAtLeastOne(_))));
    }

    #[test]
    fn sweep_single_equation() {
        let s = omega_sweep(&single_equation(), DEFAULT_OMEGA_MAX, DEFAULT_SWEEP_STEP).unwrap();
        assert_abs_diff_eq!(s.omega_opt, 1.0, epsilon = 1e-6);
        assert!(s.rho_opt < 1e-6);
        assert_abs_diff_eq!(s.omega_limit.unwrap(), 2.0, epsilon = 1e-6);
        assert!(!s.capped);
        assert!(!s.reentry);
    }

    #[test]
    fn sweep_scalar_chain() {
        let s = omega_sweep(&scalar_chain(), DEFAULT_OMEGA_MAX, DEFAULT_SWEEP_STEP).unwrap();
        assert_abs_diff_eq!(s.omega_opt, 1.0, epsilon = 1e-3);
        assert!(s.rho_opt < 1e-6);
        assert_abs_diff_eq!(s.omega_limit.unwrap(), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn sweep_curve_never_below_one() {
        let s = sweep_radius(|w| Ok(1.0 + w), 1.0, 0.1).unwrap();
        assert_eq!(s.omega_limit, None);
        assert!(sweep_radius(|_| Ok(0.5), 1.0, 0.0).is_err());
        let s = sweep_radius(|_| Ok(0.5), 1.0, 0.1).unwrap();
        assert!(s.capped);
        assert_abs_diff_eq!(s.omega_limit.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_flags_reentry() {
        // below one, above one on (1, 2), back below one after 2
        let s = sweep_radius(
            |w| Ok(if (1.0..2.0).contains(&w) { 1.5 } else { 0.1 * w }),
            3.0,
            0.05,
        )
        .unwrap();
        assert!(s.reentry);
        assert_abs_diff_eq!(s.omega_limit.unwrap(), 1.0, epsilon = 1e-5);
    }
}
