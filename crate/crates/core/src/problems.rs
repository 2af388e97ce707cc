//! Benchmark problems: domains, fields and (where known) exact solutions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fespace::ElementMap;
use crate::fields::{
    from_level_set, DegeneracyPolicy, FieldSample, FieldSpec, LevelSet, LevelSetSample, DEFAULT_C_MIN,
};
use crate::mesh::{DomainSpec, Mesh, Point2};
use crate::quadrature::QuadratureRule;

/// Half-width of the outer square shared by all benchmarks.
pub const HALF_WIDTH: f64 = 4.0 / 3.0;
/// Radius of the hole of the regular ellipse domain.
pub const HOLE_RADIUS: f64 = 0.2;
/// Half-width of the square hole of the corner domain.
pub const HOLE_HALF_WIDTH: f64 = 0.4;

/// Known velocity (and multiplier) for a problem.
pub trait ExactSolution: Send + Sync {
    /// Velocity and its Jacobian `m[c][d] = ∂u_c/∂x_d`.
    fn velocity(&self, p: Point2, t: f64) -> ([f64; 2], [[f64; 2]; 2]);
    /// Multiplier value and gradient, when known.
    fn multiplier(&self, _p: Point2, _t: f64) -> Option<(f64, [f64; 2])> {
        None
    }
}

/// Profile function `F` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Cos,
    Linear,
}

impl Profile {
    pub fn eval(self, s: f64) -> [f64; 3] {
        match self {
            Profile::Cos => [s.cos(), -s.sin(), -s.cos()],
            Profile::Linear => [s, 1.0, 0.0],
        }
    }
}

/// Constant direction `zhat` with `z = (zperp·x) F'(zhat·x)`.
///
/// The exact minimizer is `u = z zhat - F(zhat·x) zperp`.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticField {
    pub zhat: [f64; 2],
    pub zperp: [f64; 2],
    pub profile: Profile,
}

impl SyntheticField {
    pub fn new(direction: [f64; 2], profile: Profile) -> Self {
        let n = direction[0].hypot(direction[1]);
        let zhat = [direction[0] / n, direction[1] / n];
        Self { zhat, zperp: [-zhat[1], zhat[0]], profile }
    }

    fn s(&self, p: Point2) -> f64 {
        self.zhat[0] * p.x + self.zhat[1] * p.y
    }

    fn s_perp(&self, p: Point2) -> f64 {
        self.zperp[0] * p.x + self.zperp[1] * p.y
    }

    pub fn z(&self, p: Point2) -> (f64, [f64; 2]) {
        let [_, f1, f2] = self.profile.eval(self.s(p));
        let sp = self.s_perp(p);
        let grad = [self.zperp[0] * f1 + sp * f2 * self.zhat[0], self.zperp[1] * f1 + sp * f2 * self.zhat[1]];
        (sp * f1, grad)
    }

    /// The tangential part `v = -F(zhat·x) zperp` and its Jacobian.
    pub fn v(&self, p: Point2) -> ([f64; 2], [[f64; 2]; 2]) {
        let [f0, f1, _] = self.profile.eval(self.s(p));
        let val = [-f0 * self.zperp[0], -f0 * self.zperp[1]];
        let mut jac = [[0.0; 2]; 2];
        for (c, row) in jac.iter_mut().enumerate() {
            for (d, v) in row.iter_mut().enumerate() {
                *v = -f1 * self.zperp[c] * self.zhat[d];
            }
        }
        (val, jac)
    }
}

impl FieldSpec for SyntheticField {
    fn sample(&self, p: Point2, _t: f64) -> Result<FieldSample> {
        let (z, grad_z) = self.z(p);
        Ok(FieldSample { zhat: self.zhat, grad_zhat: [[0.0; 2]; 2], z, grad_z })
    }
}

impl ExactSolution for SyntheticField {
    fn velocity(&self, p: Point2, _t: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let (z, gz) = self.z(p);
        let (v, jv) = self.v(p);
        let val = [z * self.zhat[0] + v[0], z * self.zhat[1] + v[1]];
        let mut jac = jv;
        for (c, row) in jac.iter_mut().enumerate() {
            for (d, x) in row.iter_mut().enumerate() {
                *x += self.zhat[c] * gz[d];
            }
        }
        (val, jac)
    }
}

/// `φ = t P + (1 - t) Q` with `P = (d² + x² + y²)³ - 8 d² x² - c⁴` and
/// `Q = 1.3 x² + y² - 1`: an ellipse at `t = 0` bending into a biconcave curve.
#[derive(Debug, Clone, Copy)]
pub struct DeformingEllipse {
    pub c: f64,
    pub d: f64,
}

impl Default for DeformingEllipse {
    fn default() -> Self {
        Self { c: 24.0 / 25.0, d: 19.0 / 20.0 }
    }
}

impl LevelSet for DeformingEllipse {
    fn sample(&self, p: Point2, t: f64) -> LevelSetSample {
        let (x, y) = (p.x, p.y);
        let d2 = self.d * self.d;
        let s = d2 + x * x + y * y;
        let pv = s * s * s - 8.0 * d2 * x * x - self.c.powi(4);
        let pg = [6.0 * x * s * s - 16.0 * d2 * x, 6.0 * y * s * s];
        let ph = [
            [6.0 * s * s + 24.0 * x * x * s - 16.0 * d2, 24.0 * x * y * s],
            [24.0 * x * y * s, 6.0 * s * s + 24.0 * y * y * s],
        ];
        let qv = 1.3 * x * x + y * y - 1.0;
        let qg = [2.6 * x, 2.0 * y];
        let qh = [[2.6, 0.0], [0.0, 2.0]];
        let mix = |a: f64, b: f64| t * a + (1.0 - t) * b;
        LevelSetSample {
            phi: mix(pv, qv),
            phi_t: pv - qv,
            grad: [mix(pg[0], qg[0]), mix(pg[1], qg[1])],
            grad_t: [pg[0] - qg[0], pg[1] - qg[1]],
            hess: [
                [mix(ph[0][0], qh[0][0]), mix(ph[0][1], qh[0][1])],
                [mix(ph[1][0], qh[1][0]), mix(ph[1][1], qh[1][1])],
            ],
        }
    }
}

/// `φ(x, t) = ψ(M(t) x)` with `ψ = 1.3 ξ₁² + ξ₂² - 1` and `M(t)` the rotation by `ω t`.
#[derive(Debug, Clone, Copy)]
pub struct RotatingEllipse {
    pub omega: f64,
}

impl Default for RotatingEllipse {
    fn default() -> Self {
        Self { omega: 0.1 }
    }
}

impl RotatingEllipse {
    fn rotation(&self, t: f64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
        let (s, c) = (self.omega * t).sin_cos();
        let m = [[c, -s], [s, c]];
        let dm = [[-self.omega * s, -self.omega * c], [self.omega * c, -self.omega * s]];
        (m, dm)
    }

    /// Exact particle position at time `t` for a particle at `p0` at time 0.
    pub fn flow(&self, p0: Point2, t: f64) -> Point2 {
        let (m, _) = self.rotation(t);
        // x(t) = M(t)ᵀ x(0)
        Point2::new(m[0][0] * p0.x + m[1][0] * p0.y, m[0][1] * p0.x + m[1][1] * p0.y)
    }
}

fn matvec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn mat_t_vec(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

impl LevelSet for RotatingEllipse {
    fn sample(&self, p: Point2, t: f64) -> LevelSetSample {
        let (m, dm) = self.rotation(t);
        let xi = matvec(m, [p.x, p.y]);
        let dxi = matvec(dm, [p.x, p.y]);
        let psi = 1.3 * xi[0] * xi[0] + xi[1] * xi[1] - 1.0;
        let gpsi = [2.6 * xi[0], 2.0 * xi[1]];
        let hpsi = [[2.6, 0.0], [0.0, 2.0]];
        let grad = mat_t_vec(m, gpsi);
        let mut hess = [[0.0; 2]; 2];
        for (a, row) in hess.iter_mut().enumerate() {
            for (b, h) in row.iter_mut().enumerate() {
                *h = (0..2).map(|i| m[i][a] * hpsi[i][i] * m[i][b]).sum();
            }
        }
        let phi_t = gpsi[0] * dxi[0] + gpsi[1] * dxi[1];
        let hd = matvec(hpsi, dxi);
        let a1 = mat_t_vec(dm, gpsi);
        let a2 = mat_t_vec(m, hd);
        LevelSetSample { phi: psi, phi_t, grad, grad_t: [a1[0] + a2[0], a1[1] + a2[1]], hess }
    }
}

/// Rigid rotation `u = ω (y, -x)`, `λ = 0`.
#[derive(Debug, Clone, Copy)]
pub struct RigidRotation {
    pub omega: f64,
}

impl ExactSolution for RigidRotation {
    fn velocity(&self, p: Point2, _t: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        ([self.omega * p.y, -self.omega * p.x], [[0.0, self.omega], [-self.omega, 0.0]])
    }

    fn multiplier(&self, _p: Point2, _t: f64) -> Option<(f64, [f64; 2])> {
        Some((0.0, [0.0, 0.0]))
    }
}

/// Which domain the deforming ellipse is posed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipseDomain {
    /// Square minus a small disc around the critical point.
    Regular,
    /// Square minus a square: reentrant corners.
    Corner,
    /// Full square, containing the critical point of `φ(·, 0)`.
    Critical,
}

impl EllipseDomain {
    pub fn domain(self) -> DomainSpec {
        match self {
            EllipseDomain::Regular => DomainSpec::SquareMinusDisc { a: HALF_WIDTH, r: HOLE_RADIUS },
            EllipseDomain::Corner => DomainSpec::SquareMinusSquare { a: HALF_WIDTH, b: HOLE_HALF_WIDTH },
            EllipseDomain::Critical => DomainSpec::Square { a: HALF_WIDTH },
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            EllipseDomain::Regular => "regular",
            EllipseDomain::Corner => "corner",
            EllipseDomain::Critical => "critical",
        }
    }
}

/// A named benchmark.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: DomainSpec,
    pub field: Arc<dyn FieldSpec>,
    pub level_set: Option<Arc<dyn LevelSet>>,
    pub exact: Option<Arc<dyn ExactSolution>>,
    pub expected_kernel_dim: usize,
    /// Time at which stationary experiments are evaluated.
    pub t0: f64,
    /// Time interval for tracking.
    pub time_interval: (f64, f64),
    pub c_min: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("expected_kernel_dim", &self.expected_kernel_dim)
            .field("t0", &self.t0)
            .finish()
    }
}

/// Names accepted by [`ProblemSpec::by_name`].
pub const PROBLEM_NAMES: [&str; 6] = [
    "synthetic",
    "synthetic_linear",
    "deforming_ellipse_regular",
    "deforming_ellipse_corner",
    "deforming_ellipse_critical",
    "rotating_ellipse",
];

impl ProblemSpec {
    pub fn by_name(name: &str, policy: DegeneracyPolicy) -> Result<Self> {
        match name {
            "synthetic" => Ok(synthetic_problem()),
            "synthetic_linear" => Ok(synthetic_linear_problem()),
            "deforming_ellipse_regular" => Ok(deforming_ellipse_problem(EllipseDomain::Regular, policy)),
            "deforming_ellipse_corner" => Ok(deforming_ellipse_problem(EllipseDomain::Corner, policy)),
            "deforming_ellipse_critical" => Ok(deforming_ellipse_problem(EllipseDomain::Critical, policy)),
            "rotating_ellipse" => Ok(rotating_ellipse_problem(policy)),
            other => {
                Err(Error::Config(format!("unknown problem `{other}`; expected one of {}", PROBLEM_NAMES.join(", "))))
            }
        }
    }
}

/// Constant direction `(1, 2)/√5` with `F = cos` on `(-4/3, 4/3)²`.
pub fn synthetic_problem() -> ProblemSpec {
    let field = Arc::new(SyntheticField::new([1.0, 2.0], Profile::Cos));
    ProblemSpec {
        name: "synthetic".into(),
        domain: DomainSpec::Square { a: HALF_WIDTH },
        field: field.clone(),
        level_set: None,
        exact: Some(field),
        expected_kernel_dim: 1,
        t0: 0.0,
        time_interval: (0.0, 0.0),
        c_min: DEFAULT_C_MIN,
    }
}

/// Direction `(1, 0)` with `F(s) = s`: the exact solution `(y, -x)` is a rigid motion.
pub fn synthetic_linear_problem() -> ProblemSpec {
    let field = Arc::new(SyntheticField::new([1.0, 0.0], Profile::Linear));
    ProblemSpec {
        name: "synthetic_linear".into(),
        domain: DomainSpec::Square { a: HALF_WIDTH },
        field: field.clone(),
        level_set: None,
        exact: Some(field),
        expected_kernel_dim: 1,
        t0: 0.0,
        time_interval: (0.0, 0.0),
        c_min: DEFAULT_C_MIN,
    }
}

pub fn deforming_ellipse_problem(domain: EllipseDomain, policy: DegeneracyPolicy) -> ProblemSpec {
    let ls: Arc<dyn LevelSet> = Arc::new(DeformingEllipse::default());
    ProblemSpec {
        name: format!("deforming_ellipse_{}", domain.suffix()),
        domain: domain.domain(),
        field: Arc::new(from_level_set(ls.clone(), DEFAULT_C_MIN, policy)),
        level_set: Some(ls),
        exact: None,
        expected_kernel_dim: 0,
        t0: 0.0,
        time_interval: (0.0, 1.0),
        c_min: DEFAULT_C_MIN,
    }
}

pub fn rotating_ellipse_problem(policy: DegeneracyPolicy) -> ProblemSpec {
    let rot = RotatingEllipse::default();
    let ls: Arc<dyn LevelSet> = Arc::new(rot);
    ProblemSpec {
        name: "rotating_ellipse".into(),
        domain: DomainSpec::SquareMinusDisc { a: HALF_WIDTH, r: HOLE_RADIUS },
        field: Arc::new(from_level_set(ls.clone(), DEFAULT_C_MIN, policy)),
        level_set: Some(ls),
        exact: Some(Arc::new(RigidRotation { omega: rot.omega })),
        expected_kernel_dim: 0,
        t0: 0.0,
        time_interval: (0.0, 1.0),
        c_min: DEFAULT_C_MIN,
    }
}

/// `∫_Ω F(zhat·x) dx` over a mesh; zero when the exact synthetic solution is
/// H¹-orthogonal to the kernel direction.
pub fn gauge_integral(field: &SyntheticField, mesh: &Mesh, order: usize) -> f64 {
    let rule = QuadratureRule::new(order);
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let map = ElementMap::new(mesh.corners(t));
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let p = map.map(*q);
            total += w * map.det.abs() * field.profile.eval(field.s(p))[0];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::level_set_fd_mismatch;

    #[test]
    fn synthetic_value_at_origin() {
        let f = SyntheticField::new([1.0, 2.0], Profile::Cos);
        let (u, _) = f.velocity(Point2::new(0.0, 0.0), 0.0);
        let r5 = 5f64.sqrt();
        assert!((u[0] - 2.0 / r5).abs() < 1e-15);
        assert!((u[1] + 1.0 / r5).abs() < 1e-15);
    }

    #[test]
    fn linear_case_is_rigid() {
        let f = SyntheticField::new([1.0, 0.0], Profile::Linear);
        let (u, j) = f.velocity(Point2::new(0.3, -0.7), 0.0);
        assert!((u[0] + 0.7).abs() < 1e-15 && (u[1] + 0.3).abs() < 1e-15);
        assert!((j[0][1] + j[1][0]).abs() < 1e-15 && j[0][0] == 0.0 && j[1][1] == 0.0);
    }

    #[test]
    fn level_sets_match_finite_differences() {
        let pts = [Point2::new(0.3, -0.8), Point2::new(-1.1, 0.4), Point2::new(0.9, 0.9)];
        for p in pts {
            for t in [0.0, 0.4, 1.0] {
                assert!(level_set_fd_mismatch(&DeformingEllipse::default(), p, t, 1e-5) < 1e-6);
                assert!(level_set_fd_mismatch(&RotatingEllipse::default(), p, t, 1e-5) < 1e-6);
            }
        }
    }

    #[test]
    fn rotating_flow_stays_on_level_set() {
        let r = RotatingEllipse::default();
        let p0 = Point2::new(1.0 / 1.3f64.sqrt(), 0.0);
        for t in [0.0, 0.5, 1.0] {
            assert!(r.value(r.flow(p0, t), t).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(ProblemSpec::by_name("nope", DegeneracyPolicy::Fail), Err(Error::Config(_))));
        for name in PROBLEM_NAMES {
            assert_eq!(ProblemSpec::by_name(name, DegeneracyPolicy::Warn).unwrap().name, name);
        }
    }
}
