//! Plain-text mesh format and VTK legacy export.
//!
//! Text format: a line `nv nt nb`, then `nv` lines `x y`, `nt` lines
//! `i j k marker`, `nb` lines `i j marker`. Optional trailing lines
//! `circle cx cy r` and `level n`. Lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{signed_area, BoundaryEdge, Circle, Mesh, Point2};
use crate::error::{Error, Result};

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", mesh.n_vertices(), mesh.n_triangles(), mesh.boundary_edges.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {}", v.x, v.y);
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], mesh.triangle_markers[t]);
    }
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.v[0], e.v[1], e.marker);
    }
    if let Some(c) = mesh.geometry {
        let _ = writeln!(s, "circle {} {} {}", c.center.x, c.center.y, c.radius);
    }
    let _ = writeln!(s, "level {}", mesh.level);
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

/// Reads a mesh file. Returns the mesh and any warnings (e.g. repaired orientation).
pub fn read_mesh(path: impl AsRef<Path>) -> Result<(Mesh, Vec<String>)> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| perr(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_mesh(text: &str) -> Result<(Mesh, Vec<String>)> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or_else(|| perr(0, format!("unexpected end of file, expected {what}")));

    let (ln, header) = next("header")?;
    let mut it = header.split_whitespace();
    let nv: usize = field(it.next(), ln, "vertex count")?;
    let nt: usize = field(it.next(), ln, "triangle count")?;
    let nb: usize = field(it.next(), ln, "boundary edge count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex")?;
        let mut it = l.split_whitespace();
        let p = Point2::new(field(it.next(), ln, "x")?, field(it.next(), ln, "y")?);
        if !p.is_finite() {
            return Err(perr(ln, "non-finite coordinate"));
        }
        vertices.push(p);
    }
    let index = |tok: Option<&str>, ln: usize| -> Result<usize> {
        let i: usize = field(tok, ln, "vertex index")?;
        if i >= nv {
            return Err(perr(ln, format!("vertex index {i} out of range (nv = {nv})")));
        }
        Ok(i)
    };
    let mut warnings = Vec::new();
    let mut triangles = Vec::with_capacity(nt);
    let mut triangle_markers = Vec::with_capacity(nt);
    for t in 0..nt {
        let (ln, l) = next("triangle")?;
        let mut it = l.split_whitespace();
        let mut tri = [index(it.next(), ln)?, index(it.next(), ln)?, index(it.next(), ln)?];
        let marker: i32 = field(it.next(), ln, "triangle marker")?;
        let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if area == 0.0 {
            return Err(perr(ln, "degenerate triangle"));
        }
        if area < 0.0 {
            tri.swap(1, 2);
            warnings.push(format!("line {ln}: triangle {t} was clockwise, orientation fixed"));
        }
        triangles.push(tri);
        triangle_markers.push(marker);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = next("boundary edge")?;
        let mut it = l.split_whitespace();
        let v = [index(it.next(), ln)?, index(it.next(), ln)?];
        let marker: i32 = field(it.next(), ln, "edge marker")?;
        boundary_edges.push(BoundaryEdge { v, marker });
    }
    let mut geometry = None;
    let mut level = 0;
    for (ln, l) in lines {
        let mut it = l.split_whitespace();
        match it.next() {
            Some("circle") => {
                geometry = Some(Circle {
                    center: Point2::new(field(it.next(), ln, "cx")?, field(it.next(), ln, "cy")?),
                    radius: field(it.next(), ln, "radius")?,
                })
            }
            Some("level") => level = field(it.next(), ln, "level")?,
            Some(other) => return Err(perr(ln, format!("unexpected trailing content `{other}`"))),
            None => {}
        }
    }
    let mesh = Mesh { vertices, triangles, triangle_markers, boundary_edges, geometry, level };
    mesh.check_conformity()?;
    Ok((mesh, warnings))
}

/// Per-vertex data attached to a VTK export.
#[derive(Debug, Clone, Copy)]
pub enum VtkPointData<'a> {
    Scalar { name: &'a str, values: &'a [f64] },
    Vector { name: &'a str, values: &'a [[f64; 2]] },
}

/// Writes the triangulation as a VTK legacy ASCII unstructured grid.
pub fn write_vtk(mesh: &Mesh, data: &[VtkPointData<'_>], mut out: impl Write) -> Result<()> {
    let nv = mesh.n_vertices();
    writeln!(out, "# vtk DataFile Version 3.0\nakvf\nASCII\nDATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} 0", v.x, v.y)?;
    }
    let nt = mesh.n_triangles();
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }
    if !data.is_empty() {
        writeln!(out, "POINT_DATA {nv}")?;
    }
    for d in data {
        match *d {
            VtkPointData::Scalar { name, values } => {
                check_len(values.len(), nv, name)?;
                writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                for v in values {
                    writeln!(out, "{v}")?;
                }
            }
            VtkPointData::Vector { name, values } => {
                check_len(values.len(), nv, name)?;
                writeln!(out, "VECTORS {name} double")?;
                for v in values {
                    writeln!(out, "{} {} 0", v[0], v[1])?;
                }
            }
        }
    }
    Ok(())
}

fn check_len(got: usize, nv: usize, name: &str) -> Result<()> {
    if got != nv {
        return Err(Error::Dimension(format!("point data `{name}` has {got} values, mesh has {nv} vertices")));
    }
    Ok(())
}
