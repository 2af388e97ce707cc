//! The kernel-bordered saddle-point system and the end-to-end solve pipeline.
//!
//! Unknowns are ordered `[u (2n) | λ (n) | α (m)]` with block matrix
//! `[[A, Bᵀ, N], [B, 0, 0], [Nᵀ, 0, 0]]`, `N = Mv W` for the H¹-orthonormal
//! kernel basis `W`. The last block row fixes the kernel component of `u` to
//! that of `z zhat`.

use serde::Serialize;

use crate::assembly::{
    assemble_b, assemble_h1_scalar, assemble_rhs, assemble_strain, h1_vec_from_scalar, ConstraintData,
};
use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::fields::FieldSpec;
use crate::kernel::{discrete_kernel, rigid_motion_basis, KernelBasis, RigidBasis};
use crate::solver::{amd_ordering, IndefiniteSolver, SolveStats, SpdSolver};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    /// Border columns `Mv w_j`.
    pub n: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    /// Assembled block matrix in full symmetric storage.
    pub matrix: CsrMatrix,
}

/// Norms of the three block residuals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockResiduals {
    pub momentum: f64,
    pub constraint: f64,
    pub kernel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: Vec<f64>,
    #[serde(skip)]
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub residuals: BlockResiduals,
    pub stats: SolveStats,
}

pub fn build_system(
    a: &CsrMatrix,
    b: &CsrMatrix,
    mv: &CsrMatrix,
    kb: &KernelBasis,
    g: Vec<f64>,
    c: Vec<f64>,
) -> Result<SaddleSystem> {
    let nv = a.nrows();
    let nl = b.nrows();
    let m = kb.dim;
    let dims_ok = a.ncols() == nv
        && b.ncols() == nv
        && mv.nrows() == nv
        && g.len() == nl
        && c.len() == m
        && kb.vectors.iter().all(|w| w.len() == nv);
    if !dims_ok {
        return Err(Error::Dimension(format!(
            "saddle blocks: A {}x{}, B {}x{}, Mv {}x{}, g {}, c {}, kernel {}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            mv.nrows(),
            mv.ncols(),
            g.len(),
            c.len(),
            m
        )));
    }
    let n: Vec<Vec<f64>> = kb.vectors.iter().map(|w| mv.mul_vec(w)).collect();
    let bt = b.transpose();
    let dim = nv + nl + m;
    let nnz = a.nnz() + 2 * b.nnz() + 2 * m * nv;
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for i in 0..nv {
        for (j, x) in a.row(i).chain(bt.row(i).map(|(j, x)| (nv + j, x))) {
            col_idx.push(j);
            values.push(x);
        }
        for (j, col) in n.iter().enumerate() {
            col_idx.push(nv + nl + j);
            values.push(col[i]);
        }
        row_ptr.push(col_idx.len());
    }
    for i in 0..nl {
        for (j, x) in b.row(i) {
            col_idx.push(j);
            values.push(x);
        }
        row_ptr.push(col_idx.len());
    }
    for col in &n {
        col_idx.extend(0..nv);
        values.extend_from_slice(col);
        row_ptr.push(col_idx.len());
    }
    let mut matrix = CsrMatrix::from_parts(dim, dim, row_ptr, col_idx, values);
    matrix.symmetric = true;
    Ok(SaddleSystem { a: a.clone(), b: b.clone(), n, g, c, matrix })
}

impl SaddleSystem {
    pub fn n_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_lambda(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_kernel(&self) -> usize {
        self.n.len()
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n_u()];
        r.extend_from_slice(&self.g);
        r.extend_from_slice(&self.c);
        r
    }

    /// `‖g‖ + ‖c‖ + 1`.
    pub fn scale(&self) -> f64 {
        norm2(&self.g) + norm2(&self.c) + 1.0
    }

    pub fn solve(&self) -> Result<Solution> {
        self.solve_with_ordering(None)
    }

    /// Solves with the given elimination order (`perm[new] = old`).
    pub fn solve_with_ordering(&self, ordering: Option<&[usize]>) -> Result<Solution> {
        let solver = IndefiniteSolver::new(&self.matrix, ordering).map_err(|e| match e {
            Error::Solver(msg) => {
                Error::Solver(format!("{msg}; a misdetected kernel makes the system singular, try another tau"))
            }
            other => other,
        })?;
        let (x, stats) = solver.solve(&self.rhs())?;
        let (nv, nl) = (self.n_u(), self.n_lambda());
        let u = x[..nv].to_vec();
        let lambda = x[nv..nv + nl].to_vec();
        let alpha = x[nv + nl..].to_vec();
        let residuals = self.residuals(&u, &lambda, &alpha);
        let limit = 1e-9 * (1.0 + norm2(&self.rhs()));
        if residuals.momentum.max(residuals.constraint).max(residuals.kernel) > limit {
            return Err(Error::Solver(format!(
                "block residuals {:.3e}/{:.3e}/{:.3e} exceed {limit:.3e}; the kernel may be misdetected, try another tau",
                residuals.momentum, residuals.constraint, residuals.kernel
            )));
        }
        Ok(Solution { u, lambda, alpha, residuals, stats })
    }

    pub fn residuals(&self, u: &[f64], lambda: &[f64], alpha: &[f64]) -> BlockResiduals {
        let mut r1 = self.a.mul_vec(u);
        axpy(1.0, &self.b.mul_transpose_vec(lambda), &mut r1);
        for (aj, col) in alpha.iter().zip(&self.n) {
            axpy(*aj, col, &mut r1);
        }
        let mut r2 = self.b.mul_vec(u);
        axpy(-1.0, &self.g, &mut r2);
        let r3: Vec<f64> = self.n.iter().zip(&self.c).map(|(col, c)| dot(col, u) - c).collect();
        BlockResiduals { momentum: norm2(&r1), constraint: norm2(&r2), kernel: norm2(&r3) }
    }
}

/// Expands a scalar elimination order to the node-blocked saddle ordering:
/// each scalar node contributes `u_x, u_y, λ`, border unknowns come last.
pub fn node_blocked_ordering(scalar_perm: &[usize], m: usize) -> Vec<usize> {
    let n = scalar_perm.len();
    let mut perm = Vec::with_capacity(3 * n + m);
    for &s in scalar_perm {
        perm.extend_from_slice(&[s, n + s, 2 * n + s]);
    }
    perm.extend(3 * n..3 * n + m);
    perm
}

/// Energy `a(u_h, u_h)`, `‖λ_h‖₁` and their ratio `‖λ_h‖₁ / a(u_h, u_h)^{1/2}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyDiagnostics {
    pub energy: f64,
    pub lambda_h1: f64,
    pub ratio: Option<f64>,
}

pub fn energy_diagnostics(sol: &Solution, a: &CsrMatrix, m1: &CsrMatrix) -> EnergyDiagnostics {
    let energy = a.bilinear(&sol.u, &sol.u).max(0.0);
    let lambda_h1 = m1.bilinear(&sol.lambda, &sol.lambda).max(0.0).sqrt();
    let ratio = (energy > 0.0).then(|| lambda_h1 / energy.sqrt());
    EnergyDiagnostics { energy, lambda_h1, ratio }
}

/// Solves without the border and removes the kernel component afterwards:
/// `u = ũ - Q ũ + Q (z zhat)`. The singular unbordered system is made
/// solvable by pinning `m` velocity dofs at which the kernel basis is
/// nonsingular. Returns `(u, λ)`.
pub fn projected_solve(
    a: &CsrMatrix,
    b: &CsrMatrix,
    mv: &CsrMatrix,
    kb: &KernelBasis,
    g: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nv = a.nrows();
    let nl = b.nrows();
    let plain = build_system(a, b, mv, &KernelBasis::empty(), g.to_vec(), Vec::new())?;
    let pins = gauge_pins(&kb.vectors);
    let keep: Vec<usize> = (0..nv + nl).filter(|i| !pins.contains(i)).collect();
    let mut new_index = vec![usize::MAX; nv + nl];
    for (new, &old) in keep.iter().enumerate() {
        new_index[old] = new;
    }
    let mut triplets = Vec::with_capacity(plain.matrix.nnz());
    for &i in &keep {
        for (j, v) in plain.matrix.row(i) {
            if new_index[j] != usize::MAX {
                triplets.push((new_index[i], new_index[j], v));
            }
        }
    }
    let mut reduced = CsrMatrix::from_triplets(keep.len(), keep.len(), &triplets);
    reduced.symmetric = true;
    let rhs_full = plain.rhs();
    let rhs: Vec<f64> = keep.iter().map(|&i| rhs_full[i]).collect();
    let (y, _) = IndefiniteSolver::new(&reduced, None)?.solve(&rhs)?;
    let mut x = vec![0.0; nv + nl];
    for (new, &old) in keep.iter().enumerate() {
        x[old] = y[new];
    }
    let mut u = x[..nv].to_vec();
    let mu = mv.mul_vec(&u);
    for (w, cj) in kb.vectors.iter().zip(c) {
        axpy(cj - dot(&mu, w), w, &mut u);
    }
    Ok((u, x[nv..].to_vec()))
}

/// Greedy choice of rows where the columns `w_j` are linearly independent
/// (Gaussian elimination with full row pivoting on the `nv x m` matrix).
fn gauge_pins(ws: &[Vec<f64>]) -> Vec<usize> {
    let mut cols: Vec<Vec<f64>> = ws.to_vec();
    let mut pins = Vec::new();
    for j in 0..cols.len() {
        let (row, _) = cols[j]
            .iter()
            .enumerate()
            .filter(|(i, _)| !pins.contains(i))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("kernel vectors are nonempty");
        let pivot = cols[j][row];
        for k in j + 1..cols.len() {
            let f = cols[k][row] / pivot;
            let (head, tail) = cols.split_at_mut(k);
            axpy(-f, &head[j], &mut tail[0]);
        }
        pins.push(row);
    }
    pins
}

/// Field-independent operators for one space and quadrature boost, reused
/// across fields and times.
pub struct Discretization {
    pub space: FESpace,
    pub boost: usize,
    pub a: CsrMatrix,
    pub m1: CsrMatrix,
    pub mv: CsrMatrix,
    pub rigid: RigidBasis,
    m1_solver: SpdSolver,
    scalar_ordering: Vec<usize>,
}

/// Everything produced by one solve.
pub struct FieldSolve {
    pub system: SaddleSystem,
    pub kernel: KernelBasis,
    pub data: ConstraintData,
    pub solution: Solution,
}

impl Discretization {
    pub fn new(space: FESpace, boost: usize) -> Result<Self> {
        let order = space.quad_order(boost);
        let a = assemble_strain(&space, order);
        let m1 = assemble_h1_scalar(&space, order);
        let mv = h1_vec_from_scalar(&m1);
        let m1_solver = SpdSolver::new(&m1)?;
        let rigid = rigid_motion_basis(&space)?;
        let scalar_ordering = amd_ordering(&m1)?;
        Ok(Self { space, boost, a, m1, mv, rigid, m1_solver, scalar_ordering })
    }

    /// Quadrature order of the operators, `2k + boost`.
    pub fn operator_order(&self) -> usize {
        self.space.quad_order(self.boost)
    }

    /// Quadrature order of the data `g` and `(z zhat, w)₁`, `2k + 2`.
    pub fn data_order(&self) -> usize {
        self.space.quad_order(2)
    }

    pub fn m1_solver(&self) -> &SpdSolver {
        &self.m1_solver
    }

    /// Builds and solves the bordered system for `field` at time `t`.
    pub fn solve(&self, field: &dyn FieldSpec, t: f64, tau: f64) -> Result<FieldSolve> {
        let b = assemble_b(&self.space, field, t, self.operator_order())?;
        let data = assemble_rhs(&self.space, field, t, self.data_order())?;
        let kernel = discrete_kernel(&b, &self.m1_solver, &self.mv, &self.rigid, tau)?;
        let c: Vec<f64> = kernel.vectors.iter().map(|w| data.zvec_h1(w)).collect();
        let system = build_system(&self.a, &b, &self.mv, &kernel, data.g.clone(), c)?;
        let ordering = node_blocked_ordering(&self.scalar_ordering, kernel.dim);
        let solution = system.solve_with_ordering(Some(&ordering))?;
        Ok(FieldSolve { system, kernel, data, solution })
    }

    pub fn diagnostics(&self, sol: &Solution) -> EnergyDiagnostics {
        energy_diagnostics(sol, &self.a, &self.m1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, DomainSpec};
    use crate::problems::synthetic_problem;
    use std::sync::Arc;

    fn disc(k: usize) -> Discretization {
        let mesh = Arc::new(generate_mesh(&DomainSpec::Square { a: 4.0 / 3.0 }, 0.5).unwrap());
        Discretization::new(FESpace::new(mesh, k).unwrap(), 0).unwrap()
    }

    #[test]
    fn bordered_matrix_is_symmetric() {
        let d = disc(1);
        let p = synthetic_problem();
        let s = d.solve(p.field.as_ref(), 0.0, 1e-8).unwrap();
        assert_eq!(s.kernel.dim, 1);
        assert!(s.system.matrix.symmetry_defect() <= 1e-12 * s.system.matrix.max_abs());
        assert_eq!(s.system.matrix.nrows(), 3 * d.space.n_dofs() + 1);
    }

    #[test]
    fn node_blocked_ordering_is_a_permutation() {
        let mut p = node_blocked_ordering(&[2, 0, 1], 2);
        assert_eq!(p[..3], [2, 5, 8]);
        p.sort_unstable();
        assert_eq!(p, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn gauge_pins_are_independent() {
        let w = vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1e-3]];
        let pins = gauge_pins(&w);
        assert_eq!(pins.len(), 2);
        assert!(pins.contains(&2));
    }
}
