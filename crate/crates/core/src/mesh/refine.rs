use super::{BoundaryEdge, Mesh, MARKER_INNER};

/// Red refinement: every triangle is split into four through its edge midpoints.
///
/// New vertices are appended after the old ones in global edge order. Midpoints
/// of inner-boundary edges are projected onto the circle descriptor, if any.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let table = mesh.edge_table();
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(table.edges.iter().map(|&[a, b]| 0.5 * (mesh.vertices[a] + mesh.vertices[b])));

    let mut edge_of = std::collections::HashMap::with_capacity(mesh.boundary_edges.len());
    for (id, &[a, b]) in table.edges.iter().enumerate() {
        if table.multiplicity[id] == 1 {
            edge_of.insert((a, b), id);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let key = (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
        let id = edge_of[&key];
        let m = nv + id;
        if e.marker == MARKER_INNER {
            if let Some(circle) = mesh.geometry {
                vertices[m] = circle.project(vertices[m]);
            }
        }
        boundary_edges.push(BoundaryEdge { v: [e.v[0], m], marker: e.marker });
        boundary_edges.push(BoundaryEdge { v: [m, e.v[1]], marker: e.marker });
    }

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut triangle_markers = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, &[v0, v1, v2]) in mesh.triangles.iter().enumerate() {
        let [e0, e1, e2] = table.tri_edges[t];
        let (m0, m1, m2) = (nv + e0, nv + e1, nv + e2);
        triangles.extend([[v0, m2, m1], [m2, v1, m0], [m1, m0, v2], [m0, m1, m2]]);
        triangle_markers.extend([mesh.triangle_markers[t]; 4]);
    }
    Mesh { vertices, triangles, triangle_markers, boundary_edges, geometry: mesh.geometry, level: mesh.level + 1 }
}

impl Mesh {
    /// Applies [`refine_uniform`] `levels` times.
    pub fn refined(&self, levels: usize) -> Mesh {
        let mut m = self.clone();
        for _ in 0..levels {
            m = refine_uniform(&m);
        }
        m
    }
}
