//! Continuous Lagrange spaces of degree 1, 2 or 3 on affine triangles.
//!
//! Local node order: the three vertices, then the nodes of local edges
//! `(1,2)`, `(2,0)`, `(0,1)` (two per edge for k = 3, the one nearer the first
//! listed vertex first), then the interior node. Global numbering: vertices,
//! edge nodes in global edge order (for k = 3 ordered from the lower to the
//! higher vertex index), then interior nodes in triangle order.
//!
//! Vector-valued functions use the component-blocked layout: coefficient
//! `c * n_dofs + i` is component `c` of scalar dof `i`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};
use crate::quadrature::QuadratureRule;

/// Largest local basis size (k = 3).
pub const MAX_LOCAL: usize = 10;

const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

pub fn local_dofs(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Reference basis values and gradients with respect to `(ξ, η)`.
#[derive(Debug, Clone, Copy)]
pub struct RefBasis {
    pub n: usize,
    pub values: [f64; MAX_LOCAL],
    pub grads: [[f64; 2]; MAX_LOCAL],
}

/// Evaluates the degree-`k` reference basis at barycentric point `l`.
pub fn ref_basis_eval(k: usize, l: [f64; 3]) -> RefBasis {
    // Values and derivatives with respect to the barycentric coordinates.
    let mut v = [0.0; MAX_LOCAL];
    let mut d = [[0.0; 3]; MAX_LOCAL];
    match k {
        1 => {
            for i in 0..3 {
                v[i] = l[i];
                d[i][i] = 1.0;
            }
        }
        2 => {
            for i in 0..3 {
                v[i] = l[i] * (2.0 * l[i] - 1.0);
                d[i][i] = 4.0 * l[i] - 1.0;
            }
            for (e, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                v[3 + e] = 4.0 * l[a] * l[b];
                d[3 + e][a] = 4.0 * l[b];
                d[3 + e][b] = 4.0 * l[a];
            }
        }
        3 => {
            for i in 0..3 {
                let x = l[i];
                v[i] = 0.5 * x * (3.0 * x - 1.0) * (3.0 * x - 2.0);
                d[i][i] = 0.5 * (27.0 * x * x - 18.0 * x + 2.0);
            }
            for (e, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (la, lb) = (l[a], l[b]);
                let near_a = 3 + 2 * e;
                v[near_a] = 4.5 * la * lb * (3.0 * la - 1.0);
                d[near_a][a] = 4.5 * lb * (6.0 * la - 1.0);
                d[near_a][b] = 4.5 * la * (3.0 * la - 1.0);
                let near_b = near_a + 1;
                v[near_b] = 4.5 * la * lb * (3.0 * lb - 1.0);
                d[near_b][a] = 4.5 * lb * (3.0 * lb - 1.0);
                d[near_b][b] = 4.5 * la * (6.0 * lb - 1.0);
            }
            v[9] = 27.0 * l[0] * l[1] * l[2];
            d[9] = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
        }
        _ => panic!("unsupported polynomial degree {k}"),
    }
    let n = local_dofs(k);
    let mut grads = [[0.0; 2]; MAX_LOCAL];
    for i in 0..n {
        grads[i] = [d[i][1] - d[i][0], d[i][2] - d[i][0]];
    }
    RefBasis { n, values: v, grads }
}

/// Barycentric coordinates of the local Lagrange nodes.
pub fn local_nodes(k: usize) -> Vec<[f64; 3]> {
    let e = |i: usize| {
        let mut b = [0.0; 3];
        b[i] = 1.0;
        b
    };
    let mix = |a: usize, b: usize, wa: f64| {
        let mut p = [0.0; 3];
        p[a] = wa;
        p[b] = 1.0 - wa;
        p
    };
    let mut nodes: Vec<[f64; 3]> = (0..3).map(e).collect();
    match k {
        1 => {}
        2 => nodes.extend(LOCAL_EDGES.iter().map(|&[a, b]| mix(a, b, 0.5))),
        3 => {
            for &[a, b] in &LOCAL_EDGES {
                nodes.push(mix(a, b, 2.0 / 3.0));
                nodes.push(mix(a, b, 1.0 / 3.0));
            }
            nodes.push([1.0 / 3.0; 3]);
        }
        _ => panic!("unsupported polynomial degree {k}"),
    }
    nodes
}

/// Affine map from the reference triangle onto a mesh triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point2,
    /// `jac[r][c] = ∂x_r / ∂ξ_c`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    inv: [[f64; 2]; 2],
}

impl ElementMap {
    pub fn new([a, b, c]: [Point2; 3]) -> Self {
        let jac = [[b.x - a.x, c.x - a.x], [b.y - a.y, c.y - a.y]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self { origin: a, jac, det, inv }
    }

    pub fn map(&self, [xi, eta]: [f64; 2]) -> Point2 {
        Point2::new(
            self.origin.x + self.jac[0][0] * xi + self.jac[0][1] * eta,
            self.origin.y + self.jac[1][0] * xi + self.jac[1][1] * eta,
        )
    }

    pub fn map_bary(&self, l: [f64; 3]) -> Point2 {
        self.map([l[1], l[2]])
    }

    /// Physical gradient from a reference gradient: `J^{-T} ĝ`.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv[0][0] * g[0] + self.inv[1][0] * g[1], self.inv[0][1] * g[0] + self.inv[1][1] * g[1]]
    }
}

/// Reference basis tabulated at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub rule: QuadratureRule,
    pub basis: Vec<RefBasis>,
}

impl Tabulation {
    pub fn new(k: usize, rule: QuadratureRule) -> Self {
        let basis = (0..rule.len()).map(|q| ref_basis_eval(k, rule.bary(q))).collect();
        Self { rule, basis }
    }
}

/// Scalar degree-`k` Lagrange space.
#[derive(Debug, Clone)]
pub struct FESpace {
    pub mesh: Arc<Mesh>,
    pub k: usize,
    n_dofs: usize,
    n_local: usize,
    elem_dofs: Vec<usize>,
    dof_coords: Vec<Point2>,
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::Config(format!("polynomial degree must be 1, 2 or 3, got {k}")));
        }
        let table = mesh.edge_table();
        let nv = mesh.n_vertices();
        let ne = table.edges.len();
        let nt = mesh.n_triangles();
        let per_edge = k - 1;
        let per_cell = if k == 3 { 1 } else { 0 };
        let n_dofs = nv + per_edge * ne + per_cell * nt;
        let n_local = local_dofs(k);
        let mut elem_dofs = Vec::with_capacity(n_local * nt);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            elem_dofs.extend_from_slice(tri);
            for (le, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let base = nv + per_edge * table.tri_edges[t][le];
                match k {
                    2 => elem_dofs.push(base),
                    3 => {
                        if tri[a] < tri[b] {
                            elem_dofs.extend([base, base + 1]);
                        } else {
                            elem_dofs.extend([base + 1, base]);
                        }
                    }
                    _ => {}
                }
            }
            if k == 3 {
                elem_dofs.push(nv + per_edge * ne + t);
            }
        }
        let nodes = local_nodes(k);
        let mut dof_coords = vec![Point2::default(); n_dofs];
        for t in 0..nt {
            let map = ElementMap::new(mesh.corners(t));
            for (i, &b) in nodes.iter().enumerate() {
                dof_coords[elem_dofs[t * n_local + i]] = map.map_bary(b);
            }
        }
        Ok(Self { mesh, k, n_dofs, n_local, elem_dofs, dof_coords })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.elem_dofs[t * self.n_local..(t + 1) * self.n_local]
    }

    pub fn dof_coords(&self) -> &[Point2] {
        &self.dof_coords
    }

    pub fn element_map(&self, t: usize) -> ElementMap {
        ElementMap::new(self.mesh.corners(t))
    }

    /// Default assembly quadrature order `2k + boost`.
    pub fn quad_order(&self, boost: usize) -> usize {
        2 * self.k + boost
    }

    pub fn tabulate(&self, order: usize) -> Tabulation {
        Tabulation::new(self.k, QuadratureRule::new(order))
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate(&self, f: impl Fn(Point2) -> f64) -> Result<Vec<f64>> {
        self.dof_coords
            .iter()
            .map(|&p| {
                let v = f(p);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { point: p })
                }
            })
            .collect()
    }

    /// Nodal interpolant of a vector function, component-blocked.
    pub fn interpolate_vec(&self, f: impl Fn(Point2) -> [f64; 2]) -> Result<Vec<f64>> {
        let n = self.n_dofs;
        let mut out = vec![0.0; 2 * n];
        for (i, &p) in self.dof_coords.iter().enumerate() {
            let v = f(p);
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::NonFinite { point: p });
            }
            out[i] = v[0];
            out[n + i] = v[1];
        }
        Ok(out)
    }

    /// Value and physical gradient of a scalar FE function at a barycentric point of triangle `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> (f64, [f64; 2]) {
        let map = self.element_map(t);
        let rb = ref_basis_eval(self.k, bary);
        let (mut val, mut g) = (0.0, [0.0; 2]);
        for (i, &dof) in self.element_dofs(t).iter().enumerate() {
            val += coeffs[dof] * rb.values[i];
            g[0] += coeffs[dof] * rb.grads[i][0];
            g[1] += coeffs[dof] * rb.grads[i][1];
        }
        (val, map.grad(g))
    }

    /// Value and Jacobian `jac[c][d] = ∂u_c/∂x_d` of a vector FE function.
    pub fn evaluate_vec(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        let n = self.n_dofs;
        let (v0, g0) = self.evaluate(&coeffs[..n], t, bary);
        let (v1, g1) = self.evaluate(&coeffs[n..2 * n], t, bary);
        ([v0, v1], [g0, g1])
    }

    /// Area of the domain covered by the mesh.
    pub fn area(&self) -> f64 {
        self.mesh.total_area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, BoundaryEdge, DomainSpec};

    fn single() -> Arc<Mesh> {
        Arc::new(Mesh {
            vertices: vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            triangles: vec![[0, 1, 2]],
            triangle_markers: vec![0],
            boundary_edges: vec![
                BoundaryEdge { v: [0, 1], marker: 1 },
                BoundaryEdge { v: [1, 2], marker: 1 },
                BoundaryEdge { v: [2, 0], marker: 1 },
            ],
            geometry: None,
            level: 0,
        })
    }

    #[test]
    fn dof_counts() {
        assert_eq!(FESpace::new(single(), 1).unwrap().n_dofs(), 3);
        assert_eq!(FESpace::new(single(), 2).unwrap().n_dofs(), 6);
        assert_eq!(FESpace::new(single(), 3).unwrap().n_dofs(), 10);
        let two = Arc::new(generate_mesh(&DomainSpec::Square { a: 0.5 }, 2.0).unwrap());
        assert_eq!(two.n_triangles(), 2);
        assert_eq!(FESpace::new(two, 2).unwrap().n_dofs(), 9);
        assert!(FESpace::new(single(), 4).is_err());
    }

    #[test]
    fn kronecker_property() {
        for k in 1..=3 {
            for (j, node) in local_nodes(k).iter().enumerate() {
                let rb = ref_basis_eval(k, *node);
                for i in 0..rb.n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((rb.values[i] - expect).abs() < 1e-14, "k={k} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let l = [0.2, 0.3, 0.5];
        let eps = 1e-6;
        for k in 1..=3 {
            let rb = ref_basis_eval(k, l);
            let px = ref_basis_eval(k, [l[0] - eps, l[1] + eps, l[2]]);
            let mx = ref_basis_eval(k, [l[0] + eps, l[1] - eps, l[2]]);
            let py = ref_basis_eval(k, [l[0] - eps, l[1], l[2] + eps]);
            let my = ref_basis_eval(k, [l[0] + eps, l[1], l[2] - eps]);
            for i in 0..rb.n {
                assert!((rb.grads[i][0] - (px.values[i] - mx.values[i]) / (2.0 * eps)).abs() < 1e-8);
                assert!((rb.grads[i][1] - (py.values[i] - my.values[i]) / (2.0 * eps)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn shared_nodes_coincide() {
        let mesh = Arc::new(generate_mesh(&DomainSpec::SquareMinusSquare { a: 4.0 / 3.0, b: 0.4 }, 1.0).unwrap());
        for k in 1..=3 {
            let space = FESpace::new(mesh.clone(), k).unwrap();
            let nodes = local_nodes(k);
            for t in 0..mesh.n_triangles() {
                let map = space.element_map(t);
                for (i, &d) in space.element_dofs(t).iter().enumerate() {
                    assert!(map.map_bary(nodes[i]).dist(space.dof_coords()[d]) < 1e-14);
                }
            }
        }
    }
}
