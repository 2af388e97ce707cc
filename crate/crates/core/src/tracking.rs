//! Explicit Euler particle tracking along moving level sets.
//!
//! Step `i` moves every particle with the velocity at time `t_i`:
//! `ξ_i = ξ_{i-1} + Δt u_{t_i}(ξ_{i-1})`. The near-isometric velocity is the
//! discrete minimizer solved at each `t_i`; the baseline is the purely normal
//! field `-φ_t ∇φ / |∇φ|²`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::fields::{FieldSpec, LevelSet};
use crate::mesh::{Mesh, Point2};
use crate::saddle::{Discretization, FieldSolve};

/// Residual `|φ|` accepted for a projected seed.
pub const SEED_TOL: f64 = 1e-10;
pub const SEED_MAX_ITERS: usize = 50;

/// Particles within this distance of the mesh are still evaluated (by
/// extrapolating the nearest element); farther ones are lost.
pub const OUTSIDE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityMode {
    NearIsometric,
    NormalBaseline,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub steps: usize,
    pub t_end: f64,
    pub seeds: Vec<Point2>,
}

impl TrackingConfig {
    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "tracking needs steps >= 1 and t_end > 0 (got {}, {})",
                self.steps, self.t_end
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("tracking needs at least one seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Positions at `t_0, …, t_N`; frozen once lost.
    pub positions: Vec<Point2>,
    /// First step at which the particle could not be advanced.
    pub lost_at: Option<usize>,
}

impl Trajectory {
    pub fn is_active(&self, step: usize) -> bool {
        self.lost_at.is_none_or(|l| step < l)
    }
}

/// A raw point that could not be moved onto the level set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRejection {
    pub index: usize,
    pub point: Point2,
    pub reason: String,
}

/// Newton iteration `x ← x - φ ∇φ / |∇φ|²` until `|φ| ≤ 1e-10`. Points
/// that do not converge within 50 iterations, hit a vanishing gradient or
/// end outside `mesh` are rejected.
pub fn project_seeds(
    ls: &dyn LevelSet,
    raw: &[Point2],
    t: f64,
    mesh: Option<&Mesh>,
) -> (Vec<Point2>, Vec<SeedRejection>) {
    let locator = mesh.map(Mesh::locator);
    let mut seeds = Vec::new();
    let mut rejected = Vec::new();
    for (index, &p0) in raw.iter().enumerate() {
        let mut reject = |reason: String| rejected.push(SeedRejection { index, point: p0, reason });
        let mut p = p0;
        let mut converged = false;
        for _ in 0..=SEED_MAX_ITERS {
            let s = ls.sample(p, t);
            if s.phi.abs() <= SEED_TOL {
                converged = true;
                break;
            }
            let g2 = s.grad[0] * s.grad[0] + s.grad[1] * s.grad[1];
            if !(g2 > 1e-24) {
                break;
            }
            p = Point2::new(p.x - s.phi * s.grad[0] / g2, p.y - s.phi * s.grad[1] / g2);
            if !p.is_finite() {
                break;
            }
        }
        if !converged {
            reject(format!("no convergence within {SEED_MAX_ITERS} iterations"));
        } else if locator.as_ref().is_some_and(|l| l.locate(p).is_none()) {
            reject(format!("projection ({:.6}, {:.6}) is outside the mesh", p.x, p.y));
        } else {
            seeds.push(p);
        }
    }
    (seeds, rejected)
}

/// `n` points on rays from the origin at equally spaced angles, at radius `r`.
pub fn ray_points(n: usize, r: f64) -> Vec<Point2> {
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            Point2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

fn advance(
    cfg: &TrackingConfig,
    mut velocity: impl FnMut(usize, &[Point2], &[bool]) -> Result<Vec<Option<[f64; 2]>>>,
) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let dt = cfg.dt();
    let mut trajectories: Vec<Trajectory> =
        cfg.seeds.iter().map(|&s| Trajectory { positions: vec![s], lost_at: None }).collect();
    for i in 1..=cfg.steps {
        let current: Vec<Point2> = trajectories.iter().map(|tr| tr.positions[i - 1]).collect();
        let active: Vec<bool> = trajectories.iter().map(|tr| tr.lost_at.is_none()).collect();
        let vel = velocity(i, &current, &active)?;
        for ((tr, p), v) in trajectories.iter_mut().zip(&current).zip(vel) {
            let next = match (tr.lost_at, v) {
                (None, Some(v)) => Point2::new(p.x + dt * v[0], p.y + dt * v[1]),
                (None, None) => {
                    tr.lost_at = Some(i);
                    *p
                }
                (Some(_), _) => *p,
            };
            tr.positions.push(next);
        }
    }
    Ok(trajectories)
}

/// Where the near-isometric velocity is computed at each time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolveRegion {
    /// The whole mesh; operators are assembled once.
    Full,
    /// Triangles of the mesh near `Γ(t_i)`: some vertex has `|φ| ≤ width`
    /// or `φ` changes sign. Keeps critical points of `φ` away from the solve.
    Band { width: f64 },
}

/// Default band half-width in level-set units.
pub const DEFAULT_BAND_WIDTH: f64 = 0.25;

/// Near-isometric velocity fields of a time-dependent problem.
pub struct IsometricVelocity<'a> {
    pub mesh: Arc<Mesh>,
    pub k: usize,
    pub boost: usize,
    pub tau: f64,
    pub region: SolveRegion,
    pub field: &'a dyn FieldSpec,
    pub level_set: &'a dyn LevelSet,
    full: Option<Discretization>,
}

impl<'a> IsometricVelocity<'a> {
    pub fn new(
        mesh: Arc<Mesh>,
        k: usize,
        boost: usize,
        tau: f64,
        region: SolveRegion,
        field: &'a dyn FieldSpec,
        level_set: &'a dyn LevelSet,
    ) -> Result<Self> {
        let full = match region {
            SolveRegion::Full => Some(Discretization::new(FESpace::new(mesh.clone(), k)?, boost)?),
            SolveRegion::Band { width } if !(width > 0.0) => {
                return Err(Error::Config(format!("band width must be positive, got {width}")))
            }
            SolveRegion::Band { .. } => None,
        };
        Ok(Self { mesh, k, boost, tau, region, field, level_set, full })
    }

    /// Solves at time `t` and hands the discretization and solution to `f`.
    pub fn solve_at<R>(&self, t: f64, f: impl FnOnce(&Discretization, &FieldSolve) -> R) -> Result<R> {
        match (&self.full, self.region) {
            (Some(disc), _) => Ok(f(disc, &disc.solve(self.field, t, self.tau)?)),
            (None, SolveRegion::Band { width }) => {
                let band = band_mesh(&self.mesh, self.level_set, t, width);
                if band.n_triangles() == 0 {
                    return Err(Error::Config(format!("no triangles within the band at t = {t}")));
                }
                let disc = Discretization::new(FESpace::new(Arc::new(band), self.k)?, self.boost)?;
                let solve = disc.solve(self.field, t, self.tau)?;
                Ok(f(&disc, &solve))
            }
            (None, SolveRegion::Full) => unreachable!("full discretization built in new"),
        }
    }
}

/// Submesh of triangles near the zero level set of `φ(·, t)`.
pub fn band_mesh(mesh: &Mesh, ls: &dyn LevelSet, t: f64, width: f64) -> Mesh {
    let phi: Vec<f64> = mesh.vertices.iter().map(|&p| ls.value(p, t)).collect();
    mesh.submesh(|tri| {
        let v = mesh.triangles[tri].map(|i| phi[i]);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo <= 0.0 && hi >= 0.0) || v.iter().any(|x| x.abs() <= width)
    })
}

/// Tracks with the near-isometric velocity, solving at every `t_i`.
/// `on_step` sees each solve (e.g. for progress reports or exports).
pub fn track_near_isometric(
    velocity: &IsometricVelocity<'_>,
    cfg: &TrackingConfig,
    mut on_step: impl FnMut(usize, &Discretization, &FieldSolve),
) -> Result<Vec<Trajectory>> {
    advance(cfg, |i, points, active| {
        let t = cfg.time(i);
        velocity
            .solve_at(t, |disc, solve| {
                on_step(i, disc, solve);
                let locator = disc.space.mesh.locator();
                points
                    .iter()
                    .zip(active)
                    .map(|(&p, &a)| {
                        let loc = locator.locate_or_nearest(p, OUTSIDE_TOL).filter(|_| a)?;
                        let (u, _) = disc.space.evaluate_vec(&solve.solution.u, loc.triangle, loc.bary);
                        Some(u)
                    })
                    .collect()
            })
            .map_err(|e| Error::Solver(format!("tracking step {i} (t = {t}): {e}")))
    })
}

/// Tracks with the normal field `-φ_t ∇φ / |∇φ|²`, evaluated analytically.
/// Particles leaving `mesh` or meeting `|∇φ| < c_min` are lost.
pub fn track_baseline(ls: &dyn LevelSet, mesh: &Mesh, c_min: f64, cfg: &TrackingConfig) -> Result<Vec<Trajectory>> {
    let locator = mesh.locator();
    advance(cfg, |i, points, active| {
        let t = cfg.time(i);
        Ok(points
            .iter()
            .zip(active)
            .map(|(&p, &a)| {
                locator.locate_or_nearest(p, OUTSIDE_TOL).filter(|_| a)?;
                let s = ls.sample(p, t);
                let g = s.grad_norm();
                (g >= c_min && g.is_finite()).then(|| {
                    let f = -s.phi_t / (g * g);
                    [f * s.grad[0], f * s.grad[1]]
                })
            })
            .collect())
    })
}

/// Per-step quality measures of a set of trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingMetrics {
    /// `max |φ(ξ_i, t_i)|` over active particles, per step.
    pub drift: Vec<f64>,
    /// Mean over active pairs of `| |ξ_a - ξ_b| - |ξ_a(0) - ξ_b(0)| |`, per step.
    pub distortion: Vec<f64>,
    pub lost: usize,
}

impl TrackingMetrics {
    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_distortion(&self) -> f64 {
        self.distortion.last().copied().unwrap_or(0.0)
    }
}

pub fn metrics(trajectories: &[Trajectory], ls: &dyn LevelSet, cfg: &TrackingConfig) -> TrackingMetrics {
    let mut drift = Vec::with_capacity(cfg.steps + 1);
    let mut distortion = Vec::with_capacity(cfg.steps + 1);
    for i in 0..=cfg.steps {
        let t = cfg.time(i);
        let active: Vec<&Trajectory> = trajectories.iter().filter(|tr| tr.is_active(i)).collect();
        drift.push(active.iter().map(|tr| ls.value(tr.positions[i], t).abs()).fold(0.0, f64::max));
        let (mut sum, mut count) = (0.0, 0usize);
        for (a, ta) in active.iter().enumerate() {
            for tb in &active[a + 1..] {
                let now = ta.positions[i].dist(tb.positions[i]);
                let start = ta.positions[0].dist(tb.positions[0]);
                sum += (now - start).abs();
                count += 1;
            }
        }
        distortion.push(if count > 0 { sum / count as f64 } else { 0.0 });
    }
    let lost = trajectories.iter().filter(|tr| tr.lost_at.is_some()).count();
    TrackingMetrics { drift, distortion, lost }
}

/// `seed_id,step,t,x,y,lost`.
pub fn write_trajectories_csv(trajectories: &[Trajectory], cfg: &TrackingConfig, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["seed_id", "step", "t", "x", "y", "lost"]).map_err(io)?;
    for (id, tr) in trajectories.iter().enumerate() {
        for (step, p) in tr.positions.iter().enumerate() {
            let lost = u8::from(!tr.is_active(step));
            w.write_record([
                id.to_string(),
                step.to_string(),
                format!("{:.16e}", cfg.time(step)),
                format!("{:.16e}", p.x),
                format!("{:.16e}", p.y),
                lost.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `step,t,drift,distortion_iso,distortion_baseline`.
pub fn write_metrics_csv(
    iso: &TrackingMetrics,
    baseline: &TrackingMetrics,
    cfg: &TrackingConfig,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["step", "t", "drift", "distortion_iso", "distortion_baseline"]).map_err(io)?;
    for i in 0..=cfg.steps {
        w.write_record([
            i.to_string(),
            format!("{:.16e}", cfg.time(i)),
            format!("{:.16e}", iso.drift[i]),
            format!("{:.16e}", iso.distortion[i]),
            format!("{:.16e}", baseline.distortion[i]),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
