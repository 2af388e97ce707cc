mod common;

use std::sync::Arc;

use akvf_core::analysis::{error_norms, Reference};
use akvf_core::assembly::assemble_rhs;
use akvf_core::fespace::FESpace;
use akvf_core::fields::check_nondegeneracy;
use akvf_core::kernel::{rank_diagnostic, rigid_motion_basis, DEFAULT_TAU};
use akvf_core::problems::{ExactSolution, Profile, RigidRotation, SyntheticField};
use akvf_core::quadrature::QuadratureRule;
use akvf_core::tracking::{
    metrics, project_seeds, ray_points, track_near_isometric, IsometricVelocity, SolveRegion, TrackingConfig,
};
use akvf_core::{generate_mesh, DomainSpec, Mesh, Point2};
use common::*;
use rand::Rng;

/// `(0, 1)²` as a shifted copy of the centered unit square.
fn unit_square(h: f64) -> Mesh {
    let mut m = generate_mesh(&DomainSpec::Square { a: 0.5 }, h).unwrap();
    for v in &mut m.vertices {
        *v = Point2::new(v.x + 0.5, v.y + 0.5);
    }
    m
}

#[test]
fn rigid_basis_on_unit_square() {
    let space = FESpace::new(Arc::new(unit_square(0.5)), 1).unwrap();
    let rb = rigid_motion_basis(&space).unwrap();
    let s6 = 6f64.sqrt();
    assert!((rb.d[0] - 0.5).abs() < 1e-14 && (rb.d[1] + 0.5).abs() < 1e-14 && (rb.d[2] - s6).abs() < 1e-13);
    let v = rb.eval(2, Point2::new(0.2, 0.9));
    assert!((v[0] - s6 * (0.5 - 0.9)).abs() < 1e-13 && (v[1] - s6 * (0.2 - 0.5)).abs() < 1e-13);
}

#[test]
fn h1_norm_of_linear_function() {
    // (x, x)₁ over (0,1)² = 1/3 + 1.
    for k in 1..=3 {
        let space = FESpace::new(Arc::new(unit_square(0.5)), k).unwrap();
        let x = space.interpolate(|p| p.x).unwrap();
        let m1 = akvf_core::assembly::assemble_h1_scalar(&space, space.quad_order(0));
        assert!((m1.bilinear(&x, &x) - 4.0 / 3.0).abs() < 1e-13);
    }
}

#[test]
fn deforming_ellipse_normal_velocity_at_top() {
    let (c, d) = (24.0f64 / 25.0, 19.0f64 / 20.0);
    let p = problem("deforming_ellipse_regular");
    let s = p.field.sample(Point2::new(0.0, 1.0), 0.0).unwrap();
    let phi_t = (d * d + 1.0).powi(3) - c.powi(4);
    assert!((s.z + phi_t / 2.0).abs() < 1e-14);
    assert!(s.zhat[0].abs() < 1e-15 && (s.zhat[1] - 1.0).abs() < 1e-15);
}

#[test]
fn normal_gradient_matches_finite_differences() {
    let p = problem("deforming_ellipse_regular");
    let mut r = rng(3);
    let eps = 1e-6;
    for _ in 0..5 {
        let q = Point2::new(r.random_range(0.5..1.2), r.random_range(-1.2..1.2));
        let t = r.random_range(0.0..0.2);
        let s = p.field.sample(q, t).unwrap();
        for dir in 0..2 {
            let step = if dir == 0 { Point2::new(eps, 0.0) } else { Point2::new(0.0, eps) };
            let hi = p.field.sample(q + step, t).unwrap().zhat;
            let lo = p.field.sample(q - step, t).unwrap().zhat;
            for c in 0..2 {
                let fd = (hi[c] - lo[c]) / (2.0 * eps);
                assert!((fd - s.grad_zhat[c][dir]).abs() <= 1e-6 * s.grad_zhat[c][dir].abs().max(1.0));
            }
        }
    }
}

#[test]
fn regular_domain_has_no_critical_points_at_start() {
    let p = problem("deforming_ellipse_regular");
    let mesh = problem_mesh(&p, 3);
    let rep = check_nondegeneracy(p.level_set.as_ref().unwrap().as_ref(), &mesh, 0.0, 6, p.c_min);
    assert!(rep.satisfied && rep.min_norm >= 0.1, "{rep:?}");
    let crit = problem("deforming_ellipse_critical");
    let mesh = problem_mesh(&crit, 2);
    assert!(!check_nondegeneracy(crit.level_set.as_ref().unwrap().as_ref(), &mesh, 0.0, 6, crit.c_min).satisfied);
}

#[test]
fn synthetic_load_matches_quadrature_oracle() {
    let f = SyntheticField::new([1.0, 2.0], Profile::Cos);
    let tri = [Point2::new(-0.3, 0.1), Point2::new(0.9, -0.2), Point2::new(0.4, 1.1)];
    let space = FESpace::new(Arc::new(one_triangle(tri)), 2).unwrap();
    // High order on both sides isolates the assembly from quadrature error.
    let data = assemble_rhs(&space, &f, 0.0, 20).unwrap();
    let rule = QuadratureRule::new(24);
    let gl = bary_grads(tri);
    let area = 0.5 * ((tri[1].x - tri[0].x) * (tri[2].y - tri[0].y) - (tri[2].x - tri[0].x) * (tri[1].y - tri[0].y));
    let mut g = [0.0; 6];
    for q in 0..rule.len() {
        let l = rule.bary(q);
        let p = Point2::new(
            l[0] * tri[0].x + l[1] * tri[1].x + l[2] * tri[2].x,
            l[0] * tri[0].y + l[1] * tri[1].y + l[2] * tri[2].y,
        );
        let (z, gz) = f.z(p);
        for (i, (v, gv)) in oracle_basis(2, l, gl).into_iter().enumerate() {
            g[i] += rule.weights[q] * 2.0 * area * (gv[0] * gz[0] + gv[1] * gz[1] + v * z);
        }
    }
    let dofs = space.element_dofs(0);
    for i in 0..6 {
        assert!((data.g[dofs[i]] - g[i]).abs() < 1e-12, "dof {i}: {} vs {}", data.g[dofs[i]], g[i]);
    }
}

#[test]
fn rank_of_sampled_directions() {
    let p = problem("synthetic_linear");
    let grid: Vec<Point2> =
        (0..25).map(|i| Point2::new((i % 5) as f64 * 0.4 - 0.8, (i / 5) as f64 * 0.4 - 0.8)).collect();
    let r = rank_diagnostic(p.field.as_ref(), 0.0, &grid).unwrap();
    assert_eq!((r.rank, r.kernel_bound), (2, 1));
    let e = problem("rotating_ellipse");
    let mut g = rng(5);
    let pts: Vec<Point2> = (0..20)
        .map(|_| {
            let a: f64 = g.random_range(0.0..std::f64::consts::TAU);
            let rad: f64 = g.random_range(0.4..1.2);
            Point2::new(rad * a.cos(), rad * a.sin())
        })
        .collect();
    let r = rank_diagnostic(e.field.as_ref(), 0.0, &pts).unwrap();
    assert_eq!((r.rank, r.kernel_bound), (3, 0));
}

#[test]
fn rotation_velocity_is_time_derivative_of_rotation() {
    let p = problem("rotating_ellipse");
    let exact = p.exact.clone().unwrap();
    let q = Point2::new(0.7, -0.4);
    let (u, j) = exact.velocity(q, 0.0);
    assert!((u[0] - 0.1 * q.y).abs() < 1e-15 && (u[1] + 0.1 * q.x).abs() < 1e-15);
    assert_eq!(j, [[0.0, 0.1], [-0.1, 0.0]]);
    let r = RigidRotation { omega: 0.1 };
    assert_eq!(r.velocity(q, 0.0).0, u);
}

#[test]
fn boosted_rotation_recovers_interpolant() {
    let p = problem("rotating_ellipse");
    let disc = discretization(&p, 1, 1, 2);
    let fs = disc.solve(p.field.as_ref(), 0.0, DEFAULT_TAU).unwrap();
    let exact = disc.space.interpolate_vec(|q| [0.1 * q.y, -0.1 * q.x]).unwrap();
    let diff: Vec<f64> = exact.iter().zip(&fs.solution.u).map(|(a, b)| a - b).collect();
    assert!(disc.mv.bilinear(&diff, &diff).sqrt() <= 1e-8);
    assert!(disc.m1.bilinear(&fs.solution.lambda, &fs.solution.lambda).sqrt() <= 1e-8);
}

#[test]
fn interpolation_error_decreases_at_rate_k() {
    let p = problem("synthetic");
    let exact = p.exact.clone().unwrap();
    let mut errs = Vec::new();
    for level in 1..=3 {
        let space = FESpace::new(problem_mesh(&p, level), 2).unwrap();
        let u = space.interpolate_vec(|q| exact.velocity(q, 0.0).0).unwrap();
        let lam = vec![0.0; space.n_dofs()];
        let e = error_norms(&space, &u, &lam, Reference::Exact { solution: exact.as_ref(), t: 0.0 }, None, 8).unwrap();
        errs.push(e.u_h1);
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn seed_projects_onto_ellipse() {
    let p = problem("rotating_ellipse");
    let ls = p.level_set.clone().unwrap();
    let (s, rej) = project_seeds(ls.as_ref(), &[Point2::new(1.2, 0.0)], 0.0, None);
    assert!(rej.is_empty());
    assert!((1.3 * s[0].x * s[0].x + s[0].y * s[0].y - 1.0).abs() <= 1e-10);
    assert!((s[0].x - 1.3f64.sqrt().recip()).abs() <= 1e-10 && s[0].y.abs() < 1e-15);
}

#[test]
fn rotating_particles_follow_rigid_flow() {
    let p = problem("rotating_ellipse");
    let ls = p.level_set.clone().unwrap();
    let mesh = problem_mesh(&p, 1);
    let (seeds, _) = project_seeds(ls.as_ref(), &ray_points(8, 1.0), 0.0, Some(&mesh));
    let cfg = TrackingConfig { steps: 60, t_end: 1.0, seeds };
    let vel =
        IsometricVelocity::new(mesh, 1, 2, DEFAULT_TAU, SolveRegion::Full, p.field.as_ref(), ls.as_ref()).unwrap();
    let traj = track_near_isometric(&vel, &cfg, |_, _, _| {}).unwrap();
    for tr in &traj {
        let (a0, a1) = (tr.positions[0], tr.positions[60]);
        // The flow turns clockwise by 0.1 t.
        let turned = a0.y.atan2(a0.x) - a1.y.atan2(a1.x);
        assert!((turned - 0.1).abs() < 1e-3, "turned {turned}");
    }
    let m = metrics(&traj, ls.as_ref(), &cfg);
    assert!(m.final_distortion() <= cfg.dt(), "D(1) = {}", m.final_distortion());
}
