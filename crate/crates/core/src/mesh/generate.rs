use std::f64::consts::PI;

use super::{signed_area, BoundaryEdge, Circle, DomainSpec, Mesh, Point2, MARKER_INNER, MARKER_OUTER};
use crate::error::{Error, Result};

/// Smallest interior angle, in degrees, accepted from the generators.
pub const MIN_ANGLE_FLOOR: f64 = 15.0;

// Refinement levels inspected when accepting a disc mesh, and the extra angle
// kept in reserve for deeper levels (angles decay geometrically with level).
const SNAP_CHECK_LEVELS: usize = 3;
const SNAP_ANGLE_MARGIN: f64 = 2.0;

/// Builds a level-0 mesh of `domain` with element diameters at most `target_h`.
pub fn generate_mesh(domain: &DomainSpec, target_h: f64) -> Result<Mesh> {
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(Error::Config(format!("target_h must be positive, got {target_h}")));
    }
    domain.validate()?;
    let mesh = match *domain {
        DomainSpec::Square { a } => {
            let n = cells(2.0 * a, target_h);
            let ticks = uniform_ticks(-a, a, n);
            grid_mesh(&ticks, &ticks, None)
        }
        DomainSpec::SquareMinusSquare { a, b } => {
            let mut ticks = uniform_ticks(-a, -b, cells(a - b, target_h));
            ticks.pop();
            let mut mid = uniform_ticks(-b, b, cells(2.0 * b, target_h));
            mid.pop();
            ticks.extend(mid);
            ticks.extend(uniform_ticks(b, a, cells(a - b, target_h)));
            grid_mesh(&ticks, &ticks, Some(b))
        }
        DomainSpec::SquareMinusDisc { a, r } => disc_mesh(a, r, target_h)?,
        DomainSpec::External { ref path } => super::read_mesh(path)?.0,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Number of grid cells along a segment so that cell diagonals stay below `h`.
fn cells(len: f64, h: f64) -> usize {
    (len * std::f64::consts::SQRT_2 / h).ceil().max(1.0) as usize
}

fn uniform_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 }).collect()
}

/// Tensor grid split along one diagonal; cells strictly inside `[-hole, hole]^2` are removed.
fn grid_mesh(xs: &[f64], ys: &[f64], hole: Option<f64>) -> Mesh {
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let inside_hole = |i: usize, j: usize| match hole {
        Some(b) => {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            cx.abs() < b && cy.abs() < b
        }
        None => false,
    };
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            if !inside_hole(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[node(i + di, j + dj)] = true;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; used.len()];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[node(i, j)] {
                index[node(i, j)] = vertices.len();
                vertices.push(Point2::new(xs[i], ys[j]));
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if inside_hole(i, j) {
                continue;
            }
            let v00 = index[node(i, j)];
            let v10 = index[node(i + 1, j)];
            let v01 = index[node(i, j + 1)];
            let v11 = index[node(i + 1, j + 1)];
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary_edges = Vec::new();
    let cell_exists = |i: isize, j: isize| {
        i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && !inside_hole(i as usize, j as usize)
    };
    let marker = |outer: bool| if outer { MARKER_OUTER } else { MARKER_INNER };
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            if !cell_exists(i, j) {
                continue;
            }
            let (iu, ju) = (i as usize, j as usize);
            if !cell_exists(i, j - 1) {
                boundary_edges
                    .push(BoundaryEdge { v: [index[node(iu, ju)], index[node(iu + 1, ju)]], marker: marker(j == 0) });
            }
            if !cell_exists(i + 1, j) {
                boundary_edges.push(BoundaryEdge {
                    v: [index[node(iu + 1, ju)], index[node(iu + 1, ju + 1)]],
                    marker: marker(iu + 1 == nx),
                });
            }
            if !cell_exists(i, j + 1) {
                boundary_edges.push(BoundaryEdge {
                    v: [index[node(iu + 1, ju + 1)], index[node(iu, ju + 1)]],
                    marker: marker(ju + 1 == ny),
                });
            }
            if !cell_exists(i - 1, j) {
                boundary_edges
                    .push(BoundaryEdge { v: [index[node(iu, ju + 1)], index[node(iu, ju)]], marker: marker(i == 0) });
            }
        }
    }
    let n_tri = triangles.len();
    Mesh { vertices, triangles, triangle_markers: vec![0; n_tri], boundary_edges, geometry: None, level: 0 }
}

/// Ray mesh of the square minus a disc: rays from the origin through equally
/// spaced points of the square boundary, with geometrically graded layers
/// between the circle and the square. Angular resolution is increased until
/// diameter and angle bounds hold, including on refinements: snapping midpoints
/// to the circle flattens the innermost triangles when the circle is coarse.
fn disc_mesh(a: f64, r: f64, h: f64) -> Result<Mesh> {
    let mut per_side = (2.0 * a / h).ceil().max(1.0) as usize;
    loop {
        let mesh = disc_mesh_with(a, r, per_side);
        if mesh.max_diameter() <= h && refinements_keep_angles(&mesh) {
            return Ok(mesh);
        }
        per_side += 1;
        if per_side > 100_000 {
            return Err(Error::Config("disc mesh generation did not meet quality bounds".into()));
        }
    }
}

fn refinements_keep_angles(mesh: &Mesh) -> bool {
    let mut m = mesh.clone();
    for level in 0..=SNAP_CHECK_LEVELS {
        if m.min_angle_deg() < MIN_ANGLE_FLOOR + SNAP_ANGLE_MARGIN {
            return false;
        }
        if level < SNAP_CHECK_LEVELS {
            m = super::refine_uniform(&m);
        }
    }
    true
}

fn disc_mesh_with(a: f64, r: f64, per_side: usize) -> Mesh {
    let n_seg = 4 * per_side;
    // Square boundary points counterclockwise, starting at (a, -a).
    let side = 2.0 * a / per_side as f64;
    let mut outer = Vec::with_capacity(n_seg);
    for s in 0..4 {
        for i in 0..per_side {
            let t = -a + side * i as f64;
            outer.push(match s {
                0 => Point2::new(a, t),
                1 => Point2::new(-t, a),
                2 => Point2::new(-a, -t),
                _ => Point2::new(t, -a),
            });
        }
    }
    let dtheta = 2.0 * PI / n_seg as f64;
    let n_layers = ((a / r).ln() / (1.0 + dtheta).ln()).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity(n_seg * (n_layers + 1));
    // Vertex (i, j): ray i, layer j; index j * n_seg + i.
    for j in 0..=n_layers {
        for p in &outer {
            let big_r = p.norm();
            if j == n_layers {
                vertices.push(*p);
            } else {
                let rho = r * (big_r / r).powf(j as f64 / n_layers as f64);
                vertices.push((rho / big_r) * *p);
            }
        }
    }
    let id = |i: usize, j: usize| j * n_seg + (i % n_seg);
    let mut triangles = Vec::with_capacity(2 * n_seg * n_layers);
    for j in 0..n_layers {
        for i in 0..n_seg {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let d1 = vertices[p00].dist(vertices[p11]);
            let d2 = vertices[p10].dist(vertices[p01]);
            let pair = if d1 <= d2 { [[p00, p10, p11], [p00, p11, p01]] } else { [[p00, p10, p01], [p10, p11, p01]] };
            for mut tri in pair {
                if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0 {
                    tri.swap(1, 2);
                }
                triangles.push(tri);
            }
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * n_seg);
    for i in 0..n_seg {
        boundary_edges.push(BoundaryEdge { v: [id(i, n_layers), id(i + 1, n_layers)], marker: MARKER_OUTER });
        boundary_edges.push(BoundaryEdge { v: [id(i + 1, 0), id(i, 0)], marker: MARKER_INNER });
    }
    let n_tri = triangles.len();
    Mesh {
        vertices,
        triangles,
        triangle_markers: vec![0; n_tri],
        boundary_edges,
        geometry: Some(Circle { center: Point2::new(0.0, 0.0), radius: r }),
        level: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_unit_h() {
        let m = generate_mesh(&DomainSpec::Square { a: 4.0 / 3.0 }, 1.0).unwrap();
        assert!(m.vertices.iter().all(|v| v.x.abs() <= 4.0 / 3.0 && v.y.abs() <= 4.0 / 3.0));
        assert!((m.total_area() - 64.0 / 9.0).abs() < 1e-13);
        assert!(m.max_diameter() <= 1.0);
    }

    #[test]
    fn square_minus_square_unit_h() {
        let m = generate_mesh(&DomainSpec::SquareMinusSquare { a: 4.0 / 3.0, b: 0.4 }, 1.0).unwrap();
        assert_eq!(m.n_triangles(), 2 * (36 - 4));
        assert!(m.max_diameter() <= 1.0);
        assert!(m.vertices.iter().all(|v| !(v.x.abs() < 0.4 && v.y.abs() < 0.4)));
        assert!((m.total_area() - 4.0 * (16.0 / 9.0 - 0.16)).abs() < 1e-13);
        assert_eq!(m.boundary_vertices(MARKER_INNER).len(), 8);
    }

    #[test]
    fn disc_mesh_quality() {
        for h in [1.0, 0.5, 0.3] {
            let m = generate_mesh(&DomainSpec::SquareMinusDisc { a: 4.0 / 3.0, r: 0.2 }, h).unwrap();
            assert!(m.max_diameter() <= h);
            assert!(m.min_angle_deg() >= MIN_ANGLE_FLOOR);
            for v in m.boundary_vertices(MARKER_INNER) {
                assert!((m.vertices[v].norm() - 0.2).abs() < 1e-12);
            }
            let exact = 64.0 / 9.0 - PI * 0.04;
            assert!((m.total_area() - exact).abs() <= 2.0 * 0.2 * h);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(generate_mesh(&DomainSpec::Square { a: 1.0 }, 0.0).is_err());
        assert!(generate_mesh(&DomainSpec::SquareMinusDisc { a: 1.0, r: 2.0 }, 0.5).is_err());
    }
}
