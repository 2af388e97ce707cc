use super::{Mesh, Point2, LOCATE_TOL};

/// A point found in a triangle, with its barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
    /// Distance from the point to the triangle; zero when inside.
    pub distance: f64,
}

/// Uniform hash grid over triangle bounding boxes.
#[derive(Debug, Clone)]
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for v in &mesh.vertices {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let n_tri = mesh.n_triangles().max(1);
        let area = ((hi.x - lo.x) * (hi.y - lo.y)).max(f64::MIN_POSITIVE);
        let cell = (area / n_tri as f64).sqrt().max(1e-12) * 1.5;
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut loc = PointLocator { mesh, origin: lo, cell, nx, ny, buckets: Vec::new() };
        for t in 0..mesh.n_triangles() {
            let c = mesh.corners(t);
            let (i0, j0) = loc.cell_of(Point2::new(c[0].x.min(c[1].x).min(c[2].x), c[0].y.min(c[1].y).min(c[2].y)));
            let (i1, j1) = loc.cell_of(Point2::new(c[0].x.max(c[1].x).max(c[2].x), c[0].y.max(c[1].y).max(c[2].y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t as u32);
                }
            }
        }
        loc.buckets = buckets;
        loc
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        let i = fx.clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = fy.clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// Finds a triangle containing `p` within barycentric tolerance [`LOCATE_TOL`].
    pub fn locate(&self, p: Point2) -> Option<Location> {
        if !p.is_finite() {
            return None;
        }
        let (i, j) = self.cell_of(p);
        let mut best: Option<Location> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let bary = barycentric(self.mesh, t as usize, p);
            let worst = bary.iter().copied().fold(f64::MAX, f64::min);
            if worst >= -LOCATE_TOL {
                if worst >= 0.0 {
                    return Some(Location { triangle: t as usize, bary, distance: 0.0 });
                }
                let better = best.is_none_or(|b| worst > b.bary.iter().copied().fold(f64::MAX, f64::min));
                if better {
                    best = Some(Location { triangle: t as usize, bary, distance: 0.0 });
                }
            }
        }
        best
    }

    /// Like [`locate`](Self::locate), but falls back to the nearest triangle
    /// within distance `max_dist`. Barycentric coordinates are not clamped, so
    /// evaluation there extrapolates the element polynomial.
    pub fn locate_or_nearest(&self, p: Point2, max_dist: f64) -> Option<Location> {
        if let Some(loc) = self.locate(p) {
            return Some(loc);
        }
        if !p.is_finite() {
            return None;
        }
        let reach = (max_dist / self.cell).ceil() as isize + 1;
        let (ci, cj) = self.cell_of(p);
        let mut best: Option<Location> = None;
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let (i, j) = (ci as isize + di, cj as isize + dj);
                if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                    continue;
                }
                for &t in &self.buckets[j as usize * self.nx + i as usize] {
                    let d = distance_to_triangle(self.mesh.corners(t as usize), p);
                    if d <= max_dist
                        && best.is_none_or(|b| d < b.distance || (d == b.distance && (t as usize) < b.triangle))
                    {
                        best = Some(Location {
                            triangle: t as usize,
                            bary: barycentric(self.mesh, t as usize, p),
                            distance: d,
                        });
                    }
                }
            }
        }
        best
    }
}

/// Barycentric coordinates of `p` with respect to triangle `t`.
pub fn barycentric(mesh: &Mesh, t: usize, p: Point2) -> [f64; 3] {
    let [a, b, c] = mesh.corners(t);
    let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    let l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn distance_to_segment(a: Point2, b: Point2, p: Point2) -> f64 {
    let d = b - a;
    let s = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
    p.dist(a + s * d)
}

fn distance_to_triangle(c: [Point2; 3], p: Point2) -> f64 {
    let inside = (0..3).all(|i| super::signed_area(c[i], c[(i + 1) % 3], p) >= 0.0);
    if inside {
        return 0.0;
    }
    (0..3).map(|i| distance_to_segment(c[i], c[(i + 1) % 3], p)).fold(f64::MAX, f64::min)
}
