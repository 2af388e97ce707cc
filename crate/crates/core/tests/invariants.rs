mod common;

use std::sync::Arc;

use akvf_core::analysis::{convergence_study, StudyConfig};
use akvf_core::assembly::assemble_b;
use akvf_core::fespace::FESpace;
use akvf_core::kernel::DEFAULT_TAU;
use akvf_core::mesh::refine_uniform;
use akvf_core::problems::{Profile, SyntheticField};
use akvf_core::saddle::Discretization;
use akvf_core::tracking::{project_seeds, track_baseline, TrackingConfig};
use akvf_core::{generate_mesh, DomainSpec, Point2};
use common::*;
use proptest::prelude::*;

#[test]
fn operator_invariants_synthetic() {
    let p = problem("synthetic");
    for k in 1..=3 {
        let disc = discretization(&p, 1, k, 0);
        let rep = invariant_report(&disc, p.field.as_ref(), 0.0, 7);
        assert!(rep.failures().is_empty(), "k={k}: {:?}", rep.failures());
        assert_eq!(rep.kernel_dim, 1);
    }
}

#[test]
fn operator_invariants_ellipses() {
    for name in ["rotating_ellipse", "deforming_ellipse_regular", "deforming_ellipse_corner"] {
        let p = problem(name);
        let disc = discretization(&p, 1, 2, 0);
        let rep = invariant_report(&disc, p.field.as_ref(), 0.0, 11);
        assert!(rep.failures().is_empty(), "{name}: {:?}", rep.failures());
        assert_eq!(rep.kernel_dim, 0);
    }
}

#[test]
fn strain_form_is_psd_with_rigid_null_space() {
    let p = problem("rotating_ellipse");
    let disc = discretization(&p, 0, 1, 0);
    let (lo, hi) = eigen_range(&disc.a);
    assert!(lo >= -1e-12 * hi, "smallest eigenvalue {lo}");
    let eig = nalgebra::SymmetricEigen::new(to_dense(&disc.a));
    let zero = eig.eigenvalues.iter().filter(|&&e| e.abs() <= 1e-10 * hi).count();
    assert_eq!(zero, 3);
    let (m_lo, _) = eigen_range(&disc.m1);
    assert!(m_lo > 0.0);
}

#[test]
fn constant_direction_constraint_is_scaled_h1_gram() {
    let f = SyntheticField::new([1.0, 2.0], Profile::Cos);
    let mesh = Arc::new(generate_mesh(&DomainSpec::Square { a: 1.0 }, 0.5).unwrap());
    let disc = Discretization::new(FESpace::new(mesh, 2).unwrap(), 0).unwrap();
    let b = assemble_b(&disc.space, &f, 0.0, disc.operator_order()).unwrap();
    let n = disc.space.n_dofs();
    let scale = disc.m1.max_abs();
    for i in 0..n {
        for (j, m) in disc.m1.row(i) {
            for c in 0..2 {
                assert!((b.get(i, c * n + j) - f.zhat[c] * m).abs() <= 1e-14 * scale);
            }
        }
    }
}

#[test]
fn elimination_order_does_not_change_solution() {
    let p = problem("rotating_ellipse");
    let disc = discretization(&p, 1, 2, 0);
    let fs = disc.solve(p.field.as_ref(), 0.0, DEFAULT_TAU).unwrap();
    let natural: Vec<usize> = (0..fs.system.matrix.nrows()).collect();
    let other = fs.system.solve_with_ordering(Some(&natural)).unwrap();
    let du = other.u.iter().zip(&fs.solution.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dl = other.lambda.iter().zip(&fs.solution.lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let lam = fs.solution.lambda.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    assert!(du <= 1e-10 && dl <= 1e-9 * lam, "du={du:.2e} dl={dl:.2e}");
}

#[test]
fn rigid_exact_solution_is_reproduced() {
    // `(y, -x)` lies in every space: Galerkin consistency up to roundoff.
    let p = problem("synthetic_linear");
    for k in 1..=2 {
        let cfg = StudyConfig {
            k,
            boost: 0,
            levels: vec![0, 1],
            tau: DEFAULT_TAU,
            reference_levels_finer: None,
            modulo_kernel: true,
        };
        let s = convergence_study(&p, &cfg).unwrap();
        for r in &s.records {
            assert!(r.err_u_h1 <= 1e-10, "k={k} level {}: {:.2e}", r.level, r.err_u_h1);
        }
    }
}

#[test]
fn tracking_is_deterministic() {
    let p = problem("rotating_ellipse");
    let ls = p.level_set.clone().unwrap();
    let mesh = problem_mesh(&p, 1);
    let (seeds, _) = project_seeds(ls.as_ref(), &akvf_core::tracking::ray_points(8, 1.0), 0.0, Some(&mesh));
    let cfg = TrackingConfig { steps: 10, t_end: 1.0, seeds };
    let a = track_baseline(ls.as_ref(), &mesh, p.c_min, &cfg).unwrap();
    let b = track_baseline(ls.as_ref(), &mesh, p.c_min, &cfg).unwrap();
    assert_eq!(a, b);
}

fn triangle() -> impl Strategy<Value = [Point2; 3]> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..2.0f64, 0.0..std::f64::consts::TAU, 0.3..2.5f64, -1.0..1.0f64).prop_map(
        |(x, y, s, rot, ang, skew)| {
            let e = |r: f64, a: f64| Point2::new(x + r * (rot + a).cos(), y + r * (rot + a).sin());
            [Point2::new(x, y), e(s, 0.0), e(s * (1.0 + 0.5 * skew), ang)]
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn element_matrices_match_closed_form(tri in triangle(), k in 1usize..=2) {
        prop_assert!(element_oracle_deviation(tri, k) <= 1e-13);
    }

    #[test]
    fn refinement_preserves_area_and_quadruples(a in 0.5..2.0f64, h in 0.4..1.5f64) {
        let m = generate_mesh(&DomainSpec::Square { a }, h).unwrap();
        let r = refine_uniform(&m);
        prop_assert_eq!(r.n_triangles(), 4 * m.n_triangles());
        prop_assert!((r.total_area() - 4.0 * a * a).abs() <= 1e-12 * a * a);
        prop_assert!(m.max_diameter() <= h * (1.0 + 1e-12));
        r.validate().unwrap();
    }

    #[test]
    fn located_point_lies_in_its_triangle(x in -1.3..1.3f64, y in -1.3..1.3f64) {
        let p = problem("deforming_ellipse_corner");
        let mesh = problem_mesh(&p, 1);
        let q = Point2::new(x, y);
        match mesh.locate_point(q) {
            Some(loc) => {
                prop_assert!(loc.bary.iter().all(|&b| b >= -1e-10));
                let c = mesh.corners(loc.triangle);
                let back = Point2::new(
                    loc.bary[0] * c[0].x + loc.bary[1] * c[1].x + loc.bary[2] * c[2].x,
                    loc.bary[0] * c[0].y + loc.bary[1] * c[1].y + loc.bary[2] * c[2].y,
                );
                prop_assert!(back.dist(q) <= 1e-12);
            }
            None => prop_assert!(x.abs().max(y.abs()) < 0.4 + 1e-12),
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials(c in prop::array::uniform6(-1.0..1.0f64), k in 1usize..=3) {
        let mesh = Arc::new(generate_mesh(&DomainSpec::Square { a: 1.0 }, 1.0).unwrap());
        let space = FESpace::new(mesh.clone(), k).unwrap();
        let f = |p: Point2| {
            let quad = if k >= 2 { c[3] * p.x * p.x + c[4] * p.x * p.y + c[5] * p.y * p.y } else { 0.0 };
            c[0] + c[1] * p.x + c[2] * p.y + quad
        };
        let coeffs = space.interpolate(f).unwrap();
        for t in 0..mesh.n_triangles() {
            let (v, _) = space.evaluate(&coeffs, t, [0.2, 0.3, 0.5]);
            let pc = mesh.corners(t);
            let p = Point2::new(0.2 * pc[0].x + 0.3 * pc[1].x + 0.5 * pc[2].x, 0.2 * pc[0].y + 0.3 * pc[1].y + 0.5 * pc[2].y);
            prop_assert!((v - f(p)).abs() <= 1e-13);
        }
    }

    #[test]
    fn seeds_land_on_level_set(r in 0.6..1.25f64, a in 0.0..std::f64::consts::TAU, t in 0.0..1.0f64) {
        let p = problem("deforming_ellipse_regular");
        let ls = p.level_set.clone().unwrap();
        let (seeds, rejected) = project_seeds(ls.as_ref(), &[Point2::new(r * a.cos(), r * a.sin())], t, None);
        if let Some(s) = seeds.first() {
            prop_assert!(ls.value(*s, t).abs() <= 1e-10);
        } else {
            prop_assert_eq!(rejected.len(), 1);
        }
    }
}
