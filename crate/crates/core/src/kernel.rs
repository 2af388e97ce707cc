//! Rigid motions, detection of the discrete constraint kernel and H¹ projections.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::fields::FieldSpec;
use crate::mesh::Point2;
use crate::solver::SpdSolver;
use crate::sparse::{axpy, dot, CsrMatrix};

/// Default relative threshold for kernel detection.
pub const DEFAULT_TAU: f64 = 1e-8;

/// L²-orthonormal basis of the rigid motions:
/// `v₁ = |Ω|^{-1/2}(1, 0)`, `v₂ = |Ω|^{-1/2}(0, 1)`, `v₃ = d₃(d₁ - y, d₂ + x)`.
#[derive(Debug, Clone)]
pub struct RigidBasis {
    pub vectors: [Vec<f64>; 3],
    pub d: [f64; 3],
    pub area: f64,
}

impl RigidBasis {
    /// Evaluates basis field `j` at `p`.
    pub fn eval(&self, j: usize, p: Point2) -> [f64; 2] {
        let s = self.area.sqrt().recip();
        match j {
            0 => [s, 0.0],
            1 => [0.0, s],
            _ => [self.d[2] * (self.d[0] - p.y), self.d[2] * (self.d[1] + p.x)],
        }
    }
}

pub fn rigid_motion_basis(space: &FESpace) -> Result<RigidBasis> {
    let mesh = &space.mesh;
    // Integrands are at most quadratic: exact with a degree-2 rule.
    let rule = crate::quadrature::QuadratureRule::new(2);
    let integrate = |f: &dyn Fn(Point2) -> f64| -> f64 {
        let mut s = 0.0;
        for t in 0..mesh.n_triangles() {
            let map = space.element_map(t);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                s += w * map.det.abs() * f(map.map(*q));
            }
        }
        s
    };
    let area = integrate(&|_| 1.0);
    let d1 = integrate(&|p| p.y) / area;
    let d2 = -integrate(&|p| p.x) / area;
    let d3 = integrate(&|p| (d1 - p.y).powi(2) + (d2 + p.x).powi(2)).sqrt().recip();
    let mut basis = RigidBasis { vectors: Default::default(), d: [d1, d2, d3], area };
    for j in 0..3 {
        let b = basis.clone();
        basis.vectors[j] = space.interpolate_vec(|p| b.eval(j, p))?;
    }
    Ok(basis)
}

/// H¹-orthonormal basis of the detected discrete kernel.
#[derive(Debug, Clone, Serialize)]
pub struct KernelBasis {
    pub dim: usize,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// H⁻¹ norms of `B w` for the H¹-normalized eigenvectors `w` of the
    /// detection problem, ascending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl KernelBasis {
    pub fn empty() -> Self {
        Self { dim: 0, vectors: Vec::new(), singular_values: Vec::new(), threshold: 0.0 }
    }
}

/// Detects `ker(B) ∩ K`: rigid motions `w` whose constraint residual `B w`
/// has H⁻¹ dual norm at most `tau · max(1, largest)` relative to `‖w‖₁`.
pub fn discrete_kernel(
    b: &CsrMatrix,
    m1: &SpdSolver,
    mv: &CsrMatrix,
    rigid: &RigidBasis,
    tau: f64,
) -> Result<KernelBasis> {
    let w = &rigid.vectors;
    let c: Vec<Vec<f64>> = w.iter().map(|wj| b.mul_vec(wj)).collect();
    let y = m1.solve_many(&c);
    let mut g = Matrix3::<f64>::zeros();
    let mut gram = Matrix3::<f64>::zeros();
    let mvw: Vec<Vec<f64>> = w.iter().map(|wj| mv.mul_vec(wj)).collect();
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] = 0.5 * (dot(&c[i], &y[j]) + dot(&c[j], &y[i]));
            gram[(i, j)] = 0.5 * (dot(&w[i], &mvw[j]) + dot(&w[j], &mvw[i]));
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::KernelMisdetection("rigid motion Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l.try_inverse().ok_or_else(|| Error::KernelMisdetection("singular Gram factor".into()))?;
    let s = l_inv * g * l_inv.transpose();
    let s = 0.5 * (s + s.transpose());
    let eig = SymmetricEigen::new(s);
    // Eigenvalues of G carry absolute roundoff of order eps·‖G‖, so their
    // square roots bottom out near 1e-8. The dual norm of each eigenvector is
    // re-evaluated directly, which is accurate relative to its own size.
    let mut candidates: Vec<(f64, Vec<f64>)> = (0..3)
        .map(|k| {
            let coeffs = l_inv.transpose() * eig.eigenvectors.column(k);
            let mut v = vec![0.0; w[0].len()];
            let mut bv = vec![0.0; c[0].len()];
            for j in 0..3 {
                axpy(coeffs[j], &w[j], &mut v);
                axpy(coeffs[j], &c[j], &mut bv);
            }
            let sigma = dot(&bv, &m1.solve(&bv)).max(0.0).sqrt();
            (sigma, v)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let largest = candidates[2].0;
    let threshold = tau * largest.max(1.0);
    let singular_values: Vec<f64> = candidates.iter().map(|c| c.0).collect();
    let mut vectors: Vec<Vec<f64>> =
        candidates.into_iter().filter(|(sigma, _)| *sigma <= threshold).map(|(_, v)| v).collect();
    orthonormalize(&mut vectors, mv);
    Ok(KernelBasis { dim: vectors.len(), vectors, singular_values, threshold })
}

/// Modified Gram–Schmidt in the `m` inner product (two passes).
pub fn orthonormalize(vectors: &mut [Vec<f64>], m: &CsrMatrix) {
    for _ in 0..2 {
        for i in 0..vectors.len() {
            for j in 0..i {
                let (head, tail) = vectors.split_at_mut(i);
                let proj = m.bilinear(&tail[0], &head[j]);
                axpy(-proj, &head[j], &mut tail[0]);
            }
            let n = m.bilinear(&vectors[i], &vectors[i]).sqrt();
            vectors[i].iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// H¹ projection onto the kernel and its complement.
pub fn project_kernel(x: &[f64], kb: &KernelBasis, mv: &CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut proj = vec![0.0; x.len()];
    if kb.dim > 0 {
        let mx = mv.mul_vec(x);
        for w in &kb.vectors {
            axpy(dot(&mx, w), w, &mut proj);
        }
    }
    let complement = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
    (proj, complement)
}

/// Numerical rank of the sampled rows `(zhat₁, zhat₂, -y zhat₁ + x zhat₂)`.
#[derive(Debug, Clone, Serialize)]
pub struct RankDiagnostic {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Upper bound on the dimension of the continuous kernel.
    pub kernel_bound: usize,
}

pub fn rank_diagnostic(field: &dyn FieldSpec, t: f64, points: &[Point2]) -> Result<RankDiagnostic> {
    if points.len() < 3 {
        return Err(Error::Config("rank diagnostic needs at least 3 sample points".into()));
    }
    let mut m = DMatrix::<f64>::zeros(points.len(), 3);
    for (i, p) in points.iter().enumerate() {
        let z = field.sample(*p, t)?.zhat;
        m[(i, 0)] = z[0];
        m[(i, 1)] = z[1];
        m[(i, 2)] = -p.y * z[0] + p.x * z[1];
    }
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-8 * top).count();
    Ok(RankDiagnostic { singular_values: sv, rank, kernel_bound: 3 - rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Profile, SyntheticField};

    #[test]
    fn rank_of_constant_direction() {
        let f = SyntheticField::new([1.0, 0.0], Profile::Cos);
        let pts: Vec<Point2> =
            (0..16).map(|i| Point2::new((i % 4) as f64 * 0.3 - 0.5, (i / 4) as f64 * 0.3 - 0.5)).collect();
        let r = rank_diagnostic(&f, 0.0, &pts).unwrap();
        assert_eq!((r.rank, r.kernel_bound), (2, 1));
        let same = vec![Point2::new(0.2, 0.1); 5];
        assert_eq!(rank_diagnostic(&f, 0.0, &same).unwrap().rank, 1);
    }
}
