//! Conforming 2D triangulations: generation, red refinement, point location and IO.

mod generate;
mod io;
mod locate;
mod refine;

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::generate_mesh;
pub use io::{parse_mesh, read_mesh, write_mesh, write_mesh_string, write_vtk, VtkPointData};
pub use locate::{Location, PointLocator};
pub use refine::refine_uniform;

/// Marker of edges on the outer boundary of a generated domain.
pub const MARKER_OUTER: i32 = 1;
/// Marker of edges on the inner (hole) boundary of a generated domain.
pub const MARKER_INNER: i32 = 2;
/// Marker of boundary edges created by cutting out a submesh.
pub const MARKER_CUT: i32 = 3;

/// Tolerance on barycentric coordinates used by point location.
pub const LOCATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }
}

/// The computational domains the built-in generators know about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `(-a, a)^2`
    Square { a: f64 },
    /// `(-a, a)^2` minus the closed disc of radius `r` around the origin.
    SquareMinusDisc { a: f64, r: f64 },
    /// `(-a, a)^2` minus `[-b, b]^2`.
    SquareMinusSquare { a: f64, b: f64 },
    /// A mesh read from a text file.
    External { path: std::path::PathBuf },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match *self {
            DomainSpec::Square { a } if !(a > 0.0 && a.is_finite()) => {
                bad(format!("square half-width must be positive, got {a}"))
            }
            DomainSpec::SquareMinusDisc { a, r } if !(a > 0.0 && r > 0.0 && r < a) => {
                bad(format!("need 0 < r < a for square_minus_disc, got a={a}, r={r}"))
            }
            DomainSpec::SquareMinusSquare { a, b } if !(a > 0.0 && b > 0.0 && b < a) => {
                bad(format!("need 0 < b < a for square_minus_square, got a={a}, b={b}"))
            }
            _ => Ok(()),
        }
    }

    /// Exact area of the continuous domain, when known.
    pub fn area(&self) -> Option<f64> {
        match *self {
            DomainSpec::Square { a } => Some(4.0 * a * a),
            DomainSpec::SquareMinusDisc { a, r } => Some(4.0 * a * a - std::f64::consts::PI * r * r),
            DomainSpec::SquareMinusSquare { a, b } => Some(4.0 * (a * a - b * b)),
            DomainSpec::External { .. } => None,
        }
    }
}

/// Circle descriptor used to snap new boundary vertices during refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

impl Circle {
    pub fn project(&self, p: Point2) -> Point2 {
        let d = p - self.center;
        let n = d.norm();
        self.center + (self.radius / n) * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub marker: i32,
}

/// Global edge numbering of a mesh.
///
/// Edge `i` of a triangle is the one opposite its local vertex `i`. Edges are
/// numbered in order of first appearance when sweeping triangles in order.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub edges: Vec<[usize; 2]>,
    pub tri_edges: Vec<[usize; 3]>,
    /// Number of triangles sharing each edge.
    pub multiplicity: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub triangle_markers: Vec<i32>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub geometry: Option<Circle>,
    pub level: usize,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        (0..self.n_triangles()).map(|t| min_angle(self.corners(t))).fold(180.0, f64::min)
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.corners(t);
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn edge_table(&self) -> EdgeTable {
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.triangles.len() * 2);
        let mut edges = Vec::new();
        let mut multiplicity = Vec::new();
        let mut tri_edges = Vec::with_capacity(self.triangles.len());
        for tri in &self.triangles {
            let mut te = [0usize; 3];
            for (i, slot) in te.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    multiplicity.push(0u8);
                    edges.len() - 1
                });
                multiplicity[id] = multiplicity[id].saturating_add(1);
                *slot = id;
            }
            tri_edges.push(te);
        }
        EdgeTable { edges, tri_edges, multiplicity }
    }

    /// Checks orientation, conformity and consistency of the boundary edge list.
    pub fn validate(&self) -> Result<()> {
        if self.triangle_markers.len() != self.triangles.len() {
            return Err(Error::Dimension("one marker per triangle required".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::Dimension(format!("triangle {t} references a missing vertex")));
            }
            if self.signed_area(t) <= 0.0 {
                return Err(Error::Config(format!("triangle {t} has non-positive area")));
            }
        }
        self.check_conformity()
    }

    /// Every interior edge must be shared by two triangles, every listed
    /// boundary edge by exactly one, and no other edge may be unshared.
    pub fn check_conformity(&self) -> Result<()> {
        let table = self.edge_table();
        let mut boundary: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary_edges {
            let key = (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
            *boundary.entry(key).or_default() += 1;
        }
        for (id, &[a, b]) in table.edges.iter().enumerate() {
            let m = table.multiplicity[id];
            let listed = boundary.remove(&(a, b)).unwrap_or(0);
            match (m, listed) {
                (2, 0) | (1, 1) => {}
                (1, 0) => return Err(Error::Config(format!("edge ({a},{b}) is unshared but not a boundary edge"))),
                _ => {
                    return Err(Error::Config(format!(
                        "edge ({a},{b}) shared by {m} triangles, listed {listed} times as boundary"
                    )))
                }
            }
        }
        if let Some(((a, b), _)) = boundary.into_iter().next() {
            return Err(Error::Config(format!("boundary edge ({a},{b}) is not an edge of the mesh")));
        }
        Ok(())
    }

    /// Vertices on boundary edges carrying `marker`.
    pub fn boundary_vertices(&self, marker: i32) -> Vec<usize> {
        let mut vs: Vec<usize> = self.boundary_edges.iter().filter(|e| e.marker == marker).flat_map(|e| e.v).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// The triangles for which `keep` holds, with vertices renumbered in
    /// order of first use. Parent boundary markers are kept; edges exposed by
    /// the cut get [`MARKER_CUT`].
    pub fn submesh(&self, keep: impl Fn(usize) -> bool) -> Mesh {
        let kept: Vec<usize> = (0..self.n_triangles()).filter(|&t| keep(t)).collect();
        let mut index = vec![usize::MAX; self.n_vertices()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(kept.len());
        for &t in &kept {
            triangles.push(self.triangles[t].map(|v| {
                if index[v] == usize::MAX {
                    index[v] = vertices.len();
                    vertices.push(self.vertices[v]);
                }
                index[v]
            }));
        }
        let parent_markers: HashMap<(usize, usize), i32> =
            self.boundary_edges.iter().map(|e| ((e.v[0].min(e.v[1]), e.v[0].max(e.v[1])), e.marker)).collect();
        let mut sub = Mesh {
            vertices,
            triangles,
            triangle_markers: kept.iter().map(|&t| self.triangle_markers[t]).collect(),
            boundary_edges: Vec::new(),
            geometry: self.geometry,
            level: self.level,
        };
        let table = sub.edge_table();
        let mut old = vec![0usize; sub.n_vertices()];
        for (v, &i) in index.iter().enumerate() {
            if i != usize::MAX {
                old[i] = v;
            }
        }
        for (t, tri) in sub.triangles.iter().enumerate() {
            for i in 0..3 {
                if table.multiplicity[table.tri_edges[t][i]] == 1 {
                    let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    let key = (old[a].min(old[b]), old[a].max(old[b]));
                    let marker = parent_markers.get(&key).copied().unwrap_or(MARKER_CUT);
                    sub.boundary_edges.push(BoundaryEdge { v: [a, b], marker });
                }
            }
        }
        sub
    }

    pub fn locator(&self) -> PointLocator<'_> {
        PointLocator::new(self)
    }

    /// Finds a triangle containing `p`. Builds a throwaway locator; use
    /// [`PointLocator`] for repeated queries.
    pub fn locate_point(&self, p: Point2) -> Option<Location> {
        self.locator().locate(p)
    }
}

pub(crate) fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

pub(crate) fn min_angle(p: [Point2; 3]) -> f64 {
    let mut m = 180.0f64;
    for i in 0..3 {
        let a = p[i];
        let u = p[(i + 1) % 3] - a;
        let v = p[(i + 2) % 3] - a;
        let cos = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0);
        m = m.min(cos.acos().to_degrees());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Mesh {
        Mesh {
            vertices: vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            triangle_markers: vec![0, 0],
            boundary_edges: vec![
                BoundaryEdge { v: [0, 1], marker: 1 },
                BoundaryEdge { v: [1, 2], marker: 1 },
                BoundaryEdge { v: [2, 3], marker: 1 },
                BoundaryEdge { v: [3, 0], marker: 1 },
            ],
            geometry: None,
            level: 0,
        }
    }

    #[test]
    fn edge_table_counts() {
        let m = two_triangles();
        let t = m.edge_table();
        assert_eq!(t.edges.len(), 5);
        assert_eq!(t.multiplicity.iter().filter(|&&c| c == 2).count(), 1);
        m.validate().unwrap();
    }

    #[test]
    fn submesh_marks_cut_edges() {
        let m = two_triangles();
        let sub = m.submesh(|t| t == 1);
        assert_eq!((sub.n_vertices(), sub.n_triangles()), (3, 1));
        sub.validate().unwrap();
        let cut: Vec<_> = sub.boundary_edges.iter().filter(|e| e.marker == MARKER_CUT).collect();
        assert_eq!(cut.len(), 1);
        let ends = cut[0].v.map(|i| sub.vertices[i]);
        assert!(ends.contains(&Point2::new(0.0, 0.0)) && ends.contains(&Point2::new(1.0, 1.0)));
    }

    #[test]
    fn missing_boundary_edge_is_rejected() {
        let mut m = two_triangles();
        m.boundary_edges.pop();
        assert!(m.check_conformity().is_err());
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let mut m = two_triangles();
        m.triangles[0] = [0, 2, 1];
        assert!(m.validate().is_err());
    }

    #[test]
    fn domain_validation() {
        assert!(DomainSpec::SquareMinusDisc { a: 1.0, r: 1.0 }.validate().is_err());
        assert!(DomainSpec::SquareMinusSquare { a: 1.0, b: 2.0 }.validate().is_err());
        assert!(DomainSpec::Square { a: -1.0 }.validate().is_err());
        assert!(DomainSpec::SquareMinusDisc { a: 4.0 / 3.0, r: 0.2 }.validate().is_ok());
    }
}
