#![allow(dead_code)]

use std::sync::Arc;

use akvf_core::assembly::{assemble_h1_scalar, assemble_mass, assemble_strain};
use akvf_core::fespace::{local_nodes, FESpace};
use akvf_core::fields::{DegeneracyPolicy, FieldSpec};
use akvf_core::kernel::{project_kernel, DEFAULT_TAU};
use akvf_core::mesh::BoundaryEdge;
use akvf_core::problems::{ProblemSpec, Profile, SyntheticField};
use akvf_core::saddle::{projected_solve, Discretization};
use akvf_core::sparse::{norm2, norm_inf, CsrMatrix};
use akvf_core::{generate_mesh, Mesh, Point2};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn one_triangle(p: [Point2; 3]) -> Mesh {
    Mesh {
        vertices: p.to_vec(),
        triangles: vec![[0, 1, 2]],
        triangle_markers: vec![0],
        boundary_edges: (0..3).map(|i| BoundaryEdge { v: [i, (i + 1) % 3], marker: 1 }).collect(),
        geometry: None,
        level: 0,
    }
}

pub fn problem_mesh(problem: &ProblemSpec, level: usize) -> Arc<Mesh> {
    Arc::new(generate_mesh(&problem.domain, 1.0).unwrap().refined(level))
}

pub fn discretization(problem: &ProblemSpec, level: usize, k: usize, boost: usize) -> Discretization {
    Discretization::new(FESpace::new(problem_mesh(problem, level), k).unwrap(), boost).unwrap()
}

pub fn problem(name: &str) -> ProblemSpec {
    ProblemSpec::by_name(name, DegeneracyPolicy::Fail).unwrap()
}

pub fn to_dense(m: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for (j, v) in m.row(i) {
            d[(i, j)] += v;
        }
    }
    d
}

pub fn eigen_range(m: &CsrMatrix) -> (f64, f64) {
    let e = SymmetricEigen::new(to_dense(m));
    (e.eigenvalues.min(), e.eigenvalues.max())
}

/// Gradients of the P1/P2 nodal basis written directly from barycentrics:
/// vertex `λ_i` (P1), `λ_i(2λ_i − 1)` and edge `4 λ_a λ_b` (P2). Order
/// follows `local_nodes`.
pub fn oracle_basis(k: usize, l: [f64; 3], gl: [[f64; 2]; 3]) -> Vec<(f64, [f64; 2])> {
    local_nodes(k)
        .iter()
        .map(|node| {
            let support: Vec<usize> = (0..3).filter(|&i| node[i] > 0.0).collect();
            match (k, support.as_slice()) {
                (1, &[i]) => (l[i], gl[i]),
                (2, &[i]) => {
                    (l[i] * (2.0 * l[i] - 1.0), [(4.0 * l[i] - 1.0) * gl[i][0], (4.0 * l[i] - 1.0) * gl[i][1]])
                }
                (2, &[a, b]) => (
                    4.0 * l[a] * l[b],
                    [4.0 * (l[a] * gl[b][0] + l[b] * gl[a][0]), 4.0 * (l[a] * gl[b][1] + l[b] * gl[a][1])],
                ),
                _ => panic!("oracle covers P1 and P2 only"),
            }
        })
        .collect()
}

/// Barycentric gradients of a triangle.
pub fn bary_grads(p: [Point2; 3]) -> [[f64; 2]; 3] {
    let det = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
    let g = |a: Point2, b: Point2| [(a.y - b.y) / det, (b.x - a.x) / det];
    [g(p[1], p[2]), g(p[2], p[0]), g(p[0], p[1])]
}

/// Six-point symmetric rule of degree 4 on the unit-area-normalized triangle
/// (weights sum to 1, multiply by area).
pub fn degree4_rule() -> Vec<([f64; 3], f64)> {
    let (a1, w1) = (0.445948490915965, 0.223381589678011);
    let (a2, w2) = (0.091576213509771, 0.109951743655322);
    let mut out = Vec::new();
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        out.push(([b, a, a], w));
        out.push(([a, b, a], w));
        out.push(([a, a, b], w));
    }
    out
}

/// Element oracle: strain, H¹ and mass matrices of one triangle from the
/// closed-form basis and an independent quadrature, compared against the
/// library's assembled global matrices (one-element mesh). Returns the
/// largest relative entry deviation.
pub fn element_oracle_deviation(p: [Point2; 3], k: usize) -> f64 {
    let mesh = Arc::new(one_triangle(p));
    let space = FESpace::new(mesh, k).unwrap();
    let order = space.quad_order(0);
    let a = to_dense(&assemble_strain(&space, order));
    let m1 = to_dense(&assemble_h1_scalar(&space, order));
    let m0 = to_dense(&assemble_mass(&space, order));
    let dofs = space.element_dofs(0).to_vec();
    let n = space.n_dofs();
    let gl = bary_grads(p);
    let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
    let nl = dofs.len();
    let mut a_ref = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut m1_ref = DMatrix::<f64>::zeros(n, n);
    let mut m0_ref = DMatrix::<f64>::zeros(n, n);
    for (l, w) in degree4_rule() {
        let basis = oracle_basis(k, l, gl);
        let wq = w * area;
        for i in 0..nl {
            for j in 0..nl {
                let (vi, gi) = basis[i];
                let (vj, gj) = basis[j];
                let lap = gi[0] * gj[0] + gi[1] * gj[1];
                m1_ref[(dofs[i], dofs[j])] += wq * (lap + vi * vj);
                m0_ref[(dofs[i], dofs[j])] += wq * vi * vj;
                // E(φ e_c) = ∇φ ⊗ e_c + e_c ⊗ ∇φ.
                for c in 0..2 {
                    for d in 0..2 {
                        let delta = if c == d { lap } else { 0.0 };
                        a_ref[(c * n + dofs[i], d * n + dofs[j])] += wq * 2.0 * (delta + gi[d] * gj[c]);
                    }
                }
            }
        }
    }
    let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| (x - y).amax() / y.amax();
    rel(&a, &a_ref).max(rel(&m1, &m1_ref)).max(rel(&m0, &m0_ref))
}

/// Quantities checked by the operator invariant suite on one discretization.
#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub a_symmetry: f64,
    pub a_min_rayleigh: f64,
    pub m1_positive: bool,
    pub mv_positive: bool,
    pub rigid_null: f64,
    pub idempotence: f64,
    pub bordered_vs_projected: f64,
    pub residual: f64,
    pub alpha: f64,
    pub kernel_dim: usize,
}

impl InvariantReport {
    pub fn failures(&self) -> Vec<String> {
        let mut f = Vec::new();
        let mut check = |ok: bool, what: String| {
            if !ok {
                f.push(what)
            }
        };
        check(self.a_symmetry <= 1e-14, format!("A symmetry defect {:.2e}", self.a_symmetry));
        check(self.a_min_rayleigh >= -1e-12, format!("A Rayleigh quotient {:.2e} < 0", self.a_min_rayleigh));
        check(self.m1_positive && self.mv_positive, "M1/Mv not positive definite".into());
        check(self.rigid_null <= 1e-11, format!("‖A w‖∞ / max|A| = {:.2e}", self.rigid_null));
        check(self.idempotence <= 1e-12, format!("projection idempotence defect {:.2e}", self.idempotence));
        check(self.bordered_vs_projected <= 1e-8, format!("bordered vs projected {:.2e}", self.bordered_vs_projected));
        check(self.residual <= 1e-9, format!("saddle residual {:.2e}", self.residual));
        check(self.alpha <= 1e-9, format!("|α| = {:.2e}", self.alpha));
        f
    }
}

pub fn invariant_report(disc: &Discretization, field: &dyn FieldSpec, t: f64, seed: u64) -> InvariantReport {
    let mut r = rng(seed);
    let a = &disc.a;
    let max_a = a.max_abs();
    let n = a.nrows();
    let mut a_min_rayleigh = f64::INFINITY;
    for _ in 0..8 {
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let q = a.bilinear(&x, &x) / (max_a * norm2(&x).powi(2));
        a_min_rayleigh = a_min_rayleigh.min(q);
    }
    let rigid_null = disc.rigid.vectors.iter().map(|w| norm_inf(&a.mul_vec(w))).fold(0.0, f64::max) / max_a;
    let m1_positive = akvf_core::solver::SpdSolver::new(&disc.m1).is_ok();
    let mv_positive = akvf_core::solver::SpdSolver::new(&disc.mv).is_ok();
    let fs = disc.solve(field, t, DEFAULT_TAU).unwrap();
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let (p1, _) = project_kernel(&x, &fs.kernel, &disc.mv);
    let (p2, _) = project_kernel(&p1, &fs.kernel, &disc.mv);
    let idempotence = p1.iter().zip(&p2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / norm_inf(&x);
    let (u_proj, _) = projected_solve(a, &fs.system.b, &disc.mv, &fs.kernel, &fs.system.g, &fs.system.c).unwrap();
    let diff: Vec<f64> = u_proj.iter().zip(&fs.solution.u).map(|(a, b)| a - b).collect();
    let bordered_vs_projected =
        disc.mv.bilinear(&diff, &diff).sqrt() / disc.mv.bilinear(&fs.solution.u, &fs.solution.u).sqrt().max(1.0);
    let res = fs.solution.residuals;
    let scale = fs.system.scale();
    let residual = res.momentum.max(res.constraint).max(res.kernel) / scale;
    let alpha = fs.solution.alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    InvariantReport {
        a_symmetry: a.symmetry_defect() / max_a,
        a_min_rayleigh,
        m1_positive,
        mv_positive,
        rigid_null,
        idempotence,
        bordered_vs_projected,
        residual,
        alpha,
        kernel_dim: fs.kernel.dim,
    }
}

pub fn synthetic() -> SyntheticField {
    SyntheticField::new([1.0, 0.0], Profile::Cos)
}
