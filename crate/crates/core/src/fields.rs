//! Given data of the velocity problem: a unit direction field `zhat` and a
//! normal speed `z`, either in closed form or derived from a level set.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::ElementMap;
use crate::mesh::{Mesh, Point2};
use crate::quadrature::QuadratureRule;

/// Field data at one point. Jacobians use `m[c][d] = ∂f_c/∂x_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub zhat: [f64; 2],
    pub grad_zhat: [[f64; 2]; 2],
    pub z: f64,
    pub grad_z: [f64; 2],
}

impl FieldSample {
    /// `z * zhat`.
    pub fn zvec(&self) -> [f64; 2] {
        [self.z * self.zhat[0], self.z * self.zhat[1]]
    }

    /// Jacobian of `z * zhat`: `zhat ⊗ ∇z + z ∇zhat`.
    pub fn grad_zvec(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for (c, row) in m.iter_mut().enumerate() {
            for (d, v) in row.iter_mut().enumerate() {
                *v = self.zhat[c] * self.grad_z[d] + self.z * self.grad_zhat[c][d];
            }
        }
        m
    }
}

/// A time-dependent direction/speed pair.
pub trait FieldSpec: Send + Sync {
    fn sample(&self, p: Point2, t: f64) -> Result<FieldSample>;
}

/// Level-set data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetSample {
    pub phi: f64,
    pub phi_t: f64,
    pub grad: [f64; 2],
    pub grad_t: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl LevelSetSample {
    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }
}

/// A time-dependent level-set function with hand-coded derivatives.
pub trait LevelSet: Send + Sync {
    fn sample(&self, p: Point2, t: f64) -> LevelSetSample;

    fn value(&self, p: Point2, t: f64) -> f64 {
        self.sample(p, t).phi
    }
}

/// What to do when `|∇φ|` drops below `c_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneracyPolicy {
    #[default]
    Fail,
    Warn,
}

impl std::str::FromStr for DegeneracyPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(Self::Fail),
            "warn" => Ok(Self::Warn),
            other => Err(Error::Config(format!("degeneracy policy must be `fail` or `warn`, got `{other}`"))),
        }
    }
}

/// Default lower bound on `|∇φ|` over the computational domain.
pub const DEFAULT_C_MIN: f64 = 0.1;

/// Field derived from a level set: `zhat = ∇φ/|∇φ|`, `z = -φ_t/|∇φ|`.
pub struct LevelSetField {
    pub level_set: Arc<dyn LevelSet>,
    pub c_min: f64,
    pub policy: DegeneracyPolicy,
    violations: AtomicUsize,
}

impl std::fmt::Debug for LevelSetField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevelSetField")
            .field("c_min", &self.c_min)
            .field("policy", &self.policy)
            .field("violations", &self.violations())
            .finish()
    }
}

pub fn from_level_set(level_set: Arc<dyn LevelSet>, c_min: f64, policy: DegeneracyPolicy) -> LevelSetField {
    LevelSetField { level_set, c_min, policy, violations: AtomicUsize::new(0) }
}

impl LevelSetField {
    /// Number of evaluations so far that fell below `c_min` under the warn policy.
    pub fn violations(&self) -> usize {
        self.violations.load(Ordering::Relaxed)
    }

    pub fn reset_violations(&self) {
        self.violations.store(0, Ordering::Relaxed);
    }
}

/// Converts level-set derivatives into field data. `None` when `∇φ = 0`.
pub fn field_from_level_set_sample(s: &LevelSetSample) -> Option<FieldSample> {
    let n = s.grad_norm();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    let zhat = [s.grad[0] / n, s.grad[1] / n];
    let mut grad_zhat = [[0.0; 2]; 2];
    for (c, row) in grad_zhat.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            let proj = |e: usize| if c == e { 1.0 } else { 0.0 } - zhat[c] * zhat[e];
            *v = (proj(0) * s.hess[0][d] + proj(1) * s.hess[1][d]) / n;
        }
    }
    let h_zhat = [s.hess[0][0] * zhat[0] + s.hess[0][1] * zhat[1], s.hess[1][0] * zhat[0] + s.hess[1][1] * zhat[1]];
    let grad_z =
        [-(s.grad_t[0] * n - s.phi_t * h_zhat[0]) / (n * n), -(s.grad_t[1] * n - s.phi_t * h_zhat[1]) / (n * n)];
    Some(FieldSample { zhat, grad_zhat, z: -s.phi_t / n, grad_z })
}

impl FieldSpec for LevelSetField {
    fn sample(&self, p: Point2, t: f64) -> Result<FieldSample> {
        let s = self.level_set.sample(p, t);
        let norm = s.grad_norm();
        if norm < self.c_min {
            match self.policy {
                DegeneracyPolicy::Fail => return Err(Error::Degenerate { point: p, norm, c_min: self.c_min }),
                DegeneracyPolicy::Warn => {
                    if self.violations.fetch_add(1, Ordering::Relaxed) == 0 {
                        log::warn!(
                            "|grad phi| = {norm:.3e} below c_min = {} at ({}, {}), t = {t}",
                            self.c_min,
                            p.x,
                            p.y
                        );
                    }
                }
            }
        }
        field_from_level_set_sample(&s).ok_or(Error::Degenerate { point: p, norm, c_min: self.c_min })
    }
}

/// Smallest `|∇φ|` over all quadrature points of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NondegeneracyReport {
    pub min_norm: f64,
    pub argmin: Point2,
    pub c_min: f64,
    pub satisfied: bool,
}

pub fn check_nondegeneracy(
    ls: &dyn LevelSet,
    mesh: &Mesh,
    t: f64,
    quad_order: usize,
    c_min: f64,
) -> NondegeneracyReport {
    let rule = QuadratureRule::new(quad_order);
    let mut min_norm = f64::INFINITY;
    let mut argmin = Point2::default();
    for tri in 0..mesh.n_triangles() {
        let map = ElementMap::new(mesh.corners(tri));
        for q in &rule.points {
            let p = map.map(*q);
            let n = ls.sample(p, t).grad_norm();
            if n < min_norm {
                min_norm = n;
                argmin = p;
            }
        }
    }
    NondegeneracyReport { min_norm, argmin, c_min, satisfied: min_norm >= c_min }
}

/// Largest relative mismatch between supplied derivatives and central finite
/// differences of `φ` (and of `φ_t`, `∇φ` for second derivatives) at `p`.
pub fn level_set_fd_mismatch(ls: &dyn LevelSet, p: Point2, t: f64, eps: f64) -> f64 {
    let s = ls.sample(p, t);
    let dx = Point2::new(eps, 0.0);
    let dy = Point2::new(0.0, eps);
    let c = |a: f64, b: f64| (a - b) / (2.0 * eps);
    let sx = (ls.sample(p + dx, t), ls.sample(p - dx, t));
    let sy = (ls.sample(p + dy, t), ls.sample(p - dy, t));
    let st = (ls.sample(p, t + eps), ls.sample(p, t - eps));
    let pairs = [
        (s.grad[0], c(sx.0.phi, sx.1.phi)),
        (s.grad[1], c(sy.0.phi, sy.1.phi)),
        (s.phi_t, c(st.0.phi, st.1.phi)),
        (s.grad_t[0], c(sx.0.phi_t, sx.1.phi_t)),
        (s.grad_t[1], c(sy.0.phi_t, sy.1.phi_t)),
        (s.hess[0][0], c(sx.0.grad[0], sx.1.grad[0])),
        (s.hess[0][1], c(sy.0.grad[0], sy.1.grad[0])),
        (s.hess[1][0], c(sx.0.grad[1], sx.1.grad[1])),
        (s.hess[1][1], c(sy.0.grad[1], sy.1.grad[1])),
    ];
    let scale = pairs.iter().fold(1.0f64, |m, (a, _)| m.max(a.abs()));
    pairs.iter().map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max)
}

/// The stationary level set `φ = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Plane;

impl LevelSet for Plane {
    fn sample(&self, p: Point2, _t: f64) -> LevelSetSample {
        LevelSetSample { phi: p.x, phi_t: 0.0, grad: [1.0, 0.0], grad_t: [0.0; 2], hess: [[0.0; 2]; 2] }
    }
}
