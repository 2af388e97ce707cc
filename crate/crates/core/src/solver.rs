//! Sparse direct solvers backed by `faer`, with Krylov refinement against the
//! unfactored matrix.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::{amd, SupernodalThreshold};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, SymbolicSparseColMatRef};
use faer::{Col, Conj, Mat, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

/// Copies a CSR matrix into faer's column-major format. The CSR arrays of a
/// symmetric matrix are its CSC arrays; otherwise the transpose is taken.
pub fn to_faer(m: &CsrMatrix) -> SparseColMat<usize, f64> {
    if m.symmetric {
        let symbolic =
            SymbolicSparseColMat::new_checked(m.nrows(), m.ncols(), m.row_ptr().to_vec(), None, m.col_idx().to_vec());
        return SparseColMat::new(symbolic, m.values().to_vec());
    }
    let t = m.transpose();
    let symbolic =
        SymbolicSparseColMat::new_checked(m.nrows(), m.ncols(), t.row_ptr().to_vec(), None, t.col_idx().to_vec());
    SparseColMat::new(symbolic, t.values().to_vec())
}

/// Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdSolver {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SpdSolver {
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        let a = to_faer(m);
        let llt =
            a.sp_cholesky(Side::Lower).map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self { llt, n: m.nrows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }

    /// Solves for several right-hand sides given as columns.
    pub fn solve_many(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        cols.iter().map(|c| self.solve(c)).collect()
    }
}

/// Approximate minimum degree ordering of a symmetric pattern; `perm[new] = old`.
pub fn amd_ordering(m: &CsrMatrix) -> Result<Vec<usize>> {
    let n = m.nrows();
    let symbolic = SymbolicSparseColMatRef::new_checked(n, n, m.row_ptr(), None, m.col_idx());
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut mem = MemBuffer::new(amd::order_scratch::<usize>(n, m.nnz()));
    amd::order(&mut perm, &mut perm_inv, symbolic, amd::Control::default(), MemStack::new(&mut mem))
        .map_err(|e| Error::Solver(format!("ordering failed: {e:?}")))?;
    Ok(perm)
}

/// Which factorization ended up backing a [`IndefiniteSolver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    /// Supernodal LBLᵀ with Bunch–Kaufman pivoting inside supernodes.
    Lblt,
    /// LU with partial pivoting.
    Lu,
}

enum Factor {
    Lblt { symbolic: SymbolicCholesky<usize>, values: Vec<f64>, subdiag: Vec<f64>, fwd: Vec<usize>, inv: Vec<usize> },
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

/// Outcome of a refined solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub factor: FactorKind,
    pub iterations: usize,
    pub residual: f64,
    pub rhs_norm: f64,
}

/// Direct solver for symmetric indefinite matrices.
pub struct IndefiniteSolver {
    matrix: CsrMatrix,
    factor: Factor,
}

const REFINE_RTOL: f64 = 1e-14;
const GMRES_RESTART: usize = 40;
const GMRES_MAX_ITERS: usize = 400;

impl IndefiniteSolver {
    /// Factorizes `k` (full symmetric storage). `ordering` is a fill-reducing
    /// elimination order (`perm[new] = old`); AMD is used when absent.
    pub fn new(k: &CsrMatrix, ordering: Option<&[usize]>) -> Result<Self> {
        let n = k.nrows();
        let a = to_faer(k);
        let perm = match ordering {
            Some(p) => p.to_vec(),
            None => amd_ordering(k)?,
        };
        let factor = match lblt(&a, &perm) {
            Ok(f) => f,
            Err(e) => {
                log::info!("falling back to LU: {e}");
                lu(&a)?
            }
        };
        let mut solver = Self { matrix: k.clone(), factor };
        // Probe the factorization; switch to LU when it is not usable.
        if matches!(solver.factor, Factor::Lblt { .. }) {
            let probe: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
            let x = solver.apply_factor(&probe);
            let ok = x.iter().all(|v| v.is_finite()) && {
                let r = residual(&solver.matrix, &x, &probe);
                norm2(&r) <= 1e-2 * norm2(&probe)
            };
            if !ok {
                log::info!("pivoted LBLT factor inaccurate, falling back to LU");
                solver.factor = lu(&a)?;
            }
        }
        Ok(solver)
    }

    pub fn kind(&self) -> FactorKind {
        match self.factor {
            Factor::Lblt { .. } => FactorKind::Lblt,
            Factor::Lu(_) => FactorKind::Lu,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn apply_factor(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        match &self.factor {
            Factor::Lblt { symbolic, values, subdiag, fwd, inv } => {
                let perm = PermRef::new_checked(fwd, inv, n);
                let f = IntranodeLbltRef::new(symbolic, values, subdiag, perm);
                let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
                let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                f.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut mem));
                (0..n).map(|i| rhs[(i, 0)]).collect()
            }
            Factor::Lu(lu) => {
                let rhs = Col::<f64>::from_fn(n, |i| b[i]);
                let x = lu.solve(&rhs);
                (0..n).map(|i| x[i]).collect()
            }
        }
    }

    /// Solves `K x = b`: direct solve followed by right-preconditioned GMRES
    /// on the exact matrix until the relative residual reaches `1e-14`.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let bnorm = norm2(b);
        let mut stats = SolveStats { factor: self.kind(), iterations: 0, residual: 0.0, rhs_norm: bnorm };
        if bnorm == 0.0 {
            return Ok((vec![0.0; b.len()], stats));
        }
        let mut x = self.apply_factor(b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("factorization produced non-finite values".into()));
        }
        let mut r = residual(&self.matrix, &x, b);
        let mut rnorm = norm2(&r);
        let target = REFINE_RTOL * bnorm;
        while rnorm > target && stats.iterations < GMRES_MAX_ITERS {
            let (dx, its) = gmres_cycle(&self.matrix, |v| self.apply_factor(v), &r, target, GMRES_RESTART);
            stats.iterations += its;
            axpy(1.0, &dx, &mut x);
            let r_new = residual(&self.matrix, &x, b);
            let new_norm = norm2(&r_new);
            r = r_new;
            if new_norm >= 0.999 * rnorm && new_norm > target {
                rnorm = new_norm;
                break;
            }
            rnorm = new_norm;
        }
        stats.residual = rnorm;
        if !rnorm.is_finite() {
            return Err(Error::Solver("refinement diverged".into()));
        }
        Ok((x, stats))
    }
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(ax).map(|(bi, v)| bi - v).collect()
}

fn lblt(a: &SparseColMat<usize, f64>, perm: &[usize]) -> Result<Factor> {
    let n = a.nrows();
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let ord = PermRef::new_checked(perm, &inv, n);
    let params = CholeskySymbolicParams {
        supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
        ..Default::default()
    };
    let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Lower, SymmetricOrdering::Custom(ord), params)
        .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut subdiag = vec![0.0; n];
    let mut fwd = vec![0usize; n];
    let mut pinv = vec![0usize; n];
    let mut mem =
        MemBuffer::new(symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default()));
    symbolic.factorize_numeric_intranode_lblt(
        &mut values,
        &mut subdiag,
        &mut fwd,
        &mut pinv,
        a.as_ref(),
        Side::Lower,
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    );
    if values.iter().any(|v| !v.is_finite()) || subdiag.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("LBLT factorization broke down".into()));
    }
    Ok(Factor::Lblt { symbolic, values, subdiag, fwd, inv: pinv })
}

fn lu(a: &SparseColMat<usize, f64>) -> Result<Factor> {
    a.sp_lu().map(Factor::Lu).map_err(|e: LuError| Error::Solver(format!("LU factorization failed: {e:?}")))
}

/// One restarted GMRES cycle for `A dx = r` with right preconditioner `m`.
/// Returns the correction and the number of inner iterations.
fn gmres_cycle(
    a: &CsrMatrix,
    m: impl Fn(&[f64]) -> Vec<f64>,
    r: &[f64],
    target: f64,
    restart: usize,
) -> (Vec<f64>, usize) {
    let n = r.len();
    let beta = norm2(r);
    let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
    let mut precond: Vec<Vec<f64>> = Vec::new();
    let mut h = vec![vec![0.0; restart]; restart + 1];
    let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
    let mut g = vec![0.0; restart + 1];
    g[0] = beta;
    let mut steps = 0;
    for j in 0..restart {
        let z = m(&basis[j]);
        let mut w = a.mul_vec(&z);
        precond.push(z);
        for (i, v) in basis.iter().enumerate() {
            h[i][j] = dot(&w, v);
            axpy(-h[i][j], v, &mut w);
        }
        h[j + 1][j] = norm2(&w);
        for i in 0..j {
            let tmp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
            h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
            h[i][j] = tmp;
        }
        let denom = h[j][j].hypot(h[j + 1][j]);
        if denom == 0.0 {
            break;
        }
        cs[j] = h[j][j] / denom;
        sn[j] = h[j + 1][j] / denom;
        h[j][j] = denom;
        h[j + 1][j] = 0.0;
        g[j + 1] = -sn[j] * g[j];
        g[j] *= cs[j];
        steps = j + 1;
        let next_norm = norm2(&w);
        if g[j + 1].abs() <= 0.5 * target || next_norm == 0.0 {
            break;
        }
        basis.push(w.iter().map(|v| v / next_norm).collect());
    }
    let mut y = vec![0.0; steps];
    for i in (0..steps).rev() {
        let s: f64 = (i + 1..steps).map(|k| h[i][k] * y[k]).sum();
        y[i] = (g[i] - s) / h[i][i];
    }
    let mut dx = vec![0.0; n];
    for (yi, z) in y.iter().zip(&precond) {
        axpy(*yi, z, &mut dx);
    }
    (dx, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saddle_example() -> CsrMatrix {
        // [[2, 0, 1], [0, 2, 1], [1, 1, 0]]
        CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 2.0), (0, 2, 1.0), (2, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)])
    }

    #[test]
    fn indefinite_small() {
        let k = saddle_example();
        let solver = IndefiniteSolver::new(&k, Some(&[2, 0, 1])).unwrap();
        let b = [1.0, 2.0, 3.0];
        let (x, stats) = solver.solve(&b).unwrap();
        let r = residual(&k, &x, &b);
        assert!(norm2(&r) < 1e-13, "{stats:?}");
    }

    #[test]
    fn spd_small() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let s = SpdSolver::new(&m).unwrap();
        let x = s.solve(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }
}
