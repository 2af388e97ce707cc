//! Assembly of the strain form, H¹ products, the constraint form and its data.
//!
//! Velocity coefficients are component-blocked (`c * n + i`, see
//! [`crate::fespace`]); the multiplier lives in the scalar space.

use crate::error::Result;
use crate::fespace::{ElementMap, FESpace, Tabulation, MAX_LOCAL};
use crate::fields::FieldSpec;
use crate::mesh::Point2;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

/// Basis data mapped to one physical quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub point: Point2,
    /// Reference weight times `|det J|`.
    pub weight: f64,
    pub values: [f64; MAX_LOCAL],
    pub grads: [[f64; 2]; MAX_LOCAL],
}

/// Maps a tabulation onto triangle `t`, overwriting `out`.
pub fn element_quadrature(space: &FESpace, tab: &Tabulation, t: usize, out: &mut Vec<QuadPoint>) -> ElementMap {
    let map = space.element_map(t);
    let n = space.n_local();
    out.clear();
    for (q, rb) in tab.basis.iter().enumerate() {
        let mut grads = [[0.0; 2]; MAX_LOCAL];
        for i in 0..n {
            grads[i] = map.grad(rb.grads[i]);
        }
        out.push(QuadPoint {
            point: map.map(tab.rule.points[q]),
            weight: tab.rule.weights[q] * map.det.abs(),
            values: rb.values,
            grads,
        });
    }
    map
}

/// Calls `f(t, dofs, quad points)` for every triangle.
pub fn for_each_element<F>(space: &FESpace, order: usize, mut f: F) -> Result<()>
where
    F: FnMut(usize, &[usize], &[QuadPoint]) -> Result<()>,
{
    let tab = Tabulation::new(space.k, QuadratureRule::new(order));
    let mut qp = Vec::with_capacity(tab.rule.len());
    for t in 0..space.mesh.n_triangles() {
        element_quadrature(space, &tab, t, &mut qp);
        f(t, space.element_dofs(t), &qp)?;
    }
    Ok(())
}

fn scalar_rows(space: &FESpace) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); space.n_dofs()];
    for t in 0..space.mesh.n_triangles() {
        let dofs = space.element_dofs(t);
        for &i in dofs {
            rows[i].extend_from_slice(dofs);
        }
    }
    rows
}

/// Empty scalar matrix with the connectivity pattern of `space`.
pub fn scalar_pattern(space: &FESpace) -> CsrMatrix {
    let n = space.n_dofs();
    CsrMatrix::from_row_lists(n, n, scalar_rows(space))
}

/// Empty `2n x 2n` matrix coupling both components of all connected dofs.
pub fn vector_pattern(space: &FESpace) -> CsrMatrix {
    let n = space.n_dofs();
    let scalar = scalar_rows(space);
    let mut rows = vec![Vec::new(); 2 * n];
    for (i, cols) in scalar.into_iter().enumerate() {
        let mut r: Vec<usize> = cols.to_vec();
        r.extend(cols.iter().map(|j| j + n));
        rows[n + i] = r.clone();
        rows[i] = r;
    }
    CsrMatrix::from_row_lists(2 * n, 2 * n, rows)
}

/// Empty `n x 2n` matrix for the constraint form.
pub fn mixed_pattern(space: &FESpace) -> CsrMatrix {
    let n = space.n_dofs();
    let rows = scalar_rows(space)
        .into_iter()
        .map(|cols| {
            let mut r = cols.clone();
            r.extend(cols.iter().map(|j| j + n));
            r
        })
        .collect();
    CsrMatrix::from_row_lists(n, 2 * n, rows)
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// H¹ product `∫ ∇v·∇w + v w` on the scalar space.
pub fn assemble_h1_scalar(space: &FESpace, order: usize) -> CsrMatrix {
    assemble_scalar_form(space, order, 1.0, 1.0)
}

/// L² product `∫ v w` on the scalar space.
pub fn assemble_mass(space: &FESpace, order: usize) -> CsrMatrix {
    assemble_scalar_form(space, order, 0.0, 1.0)
}

fn assemble_scalar_form(space: &FESpace, order: usize, grad_coef: f64, mass_coef: f64) -> CsrMatrix {
    let mut m = scalar_pattern(space);
    let nl = space.n_local();
    let mut local = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    for_each_element(space, order, |_, dofs, qps| {
        for row in local.iter_mut().take(nl) {
            row[..nl].fill(0.0);
        }
        for qp in qps {
            for i in 0..nl {
                for j in 0..nl {
                    local[i][j] += qp.weight
                        * (grad_coef * dot2(qp.grads[i], qp.grads[j]) + mass_coef * qp.values[i] * qp.values[j]);
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                m.add(dofs[i], dofs[j], local[i][j]);
            }
        }
        Ok(())
    })
    .expect("scalar assembly is infallible");
    m.symmetric = true;
    m
}

/// Block-diagonal vector H¹ product from the scalar one.
pub fn h1_vec_from_scalar(m1: &CsrMatrix) -> CsrMatrix {
    let n = m1.nrows();
    let mut rows = vec![Vec::new(); 2 * n];
    for i in 0..n {
        let cols: Vec<usize> = m1.row(i).map(|(j, _)| j).collect();
        rows[n + i] = cols.iter().map(|j| j + n).collect();
        rows[i] = cols;
    }
    let mut mv = CsrMatrix::from_row_lists(2 * n, 2 * n, rows);
    for i in 0..n {
        for (j, v) in m1.row(i) {
            mv.add(i, j, v);
            mv.add(n + i, n + j, v);
        }
    }
    mv.symmetric = true;
    mv
}

/// Vector H¹ product `∫ ∇v:∇w + v·w`.
pub fn assemble_h1_vec(space: &FESpace, order: usize) -> CsrMatrix {
    h1_vec_from_scalar(&assemble_h1_scalar(space, order))
}

/// Strain form `∫ E(v):E(w)` with `E(v) = ∇v + ∇vᵀ`.
pub fn assemble_strain(space: &FESpace, order: usize) -> CsrMatrix {
    let n = space.n_dofs();
    let mut a = vector_pattern(space);
    let nl = space.n_local();
    let mut local = vec![0.0; 4 * nl * nl];
    let idx = |c: usize, i: usize, d: usize, j: usize| ((c * nl + i) * 2 + d) * nl + j;
    for_each_element(space, order, |_, dofs, qps| {
        local.fill(0.0);
        for qp in qps {
            for i in 0..nl {
                let gi = qp.grads[i];
                for j in 0..nl {
                    let gj = qp.grads[j];
                    let lap = dot2(gi, gj);
                    for c in 0..2 {
                        for d in 0..2 {
                            let delta = if c == d { lap } else { 0.0 };
                            local[idx(c, i, d, j)] += qp.weight * 2.0 * (delta + gi[d] * gj[c]);
                        }
                    }
                }
            }
        }
        for c in 0..2 {
            for i in 0..nl {
                for d in 0..2 {
                    for j in 0..nl {
                        a.add(c * n + dofs[i], d * n + dofs[j], local[idx(c, i, d, j)]);
                    }
                }
            }
        }
        Ok(())
    })
    .expect("strain assembly is infallible");
    a.symmetric = true;
    a
}

/// Constraint form `b(μ, v) = (μ, v·zhat)₁`: rows scalar dofs, columns velocity dofs.
pub fn assemble_b(space: &FESpace, field: &dyn FieldSpec, t: f64, order: usize) -> Result<CsrMatrix> {
    let n = space.n_dofs();
    let mut b = mixed_pattern(space);
    let nl = space.n_local();
    let mut local = vec![0.0; 2 * nl * nl];
    for_each_element(space, order, |_, dofs, qps| {
        local.fill(0.0);
        for qp in qps {
            let f = field.sample(qp.point, t)?;
            for j in 0..nl {
                // ∇(ψ_j zhat_c) and ψ_j zhat_c for both components.
                let psi = qp.values[j];
                let gpsi = qp.grads[j];
                for c in 0..2 {
                    let grad =
                        [f.zhat[c] * gpsi[0] + psi * f.grad_zhat[c][0], f.zhat[c] * gpsi[1] + psi * f.grad_zhat[c][1]];
                    let val = psi * f.zhat[c];
                    for i in 0..nl {
                        local[(i * 2 + c) * nl + j] += qp.weight * (dot2(qp.grads[i], grad) + qp.values[i] * val);
                    }
                }
            }
        }
        for i in 0..nl {
            for c in 0..2 {
                for j in 0..nl {
                    b.add(dofs[i], c * n + dofs[j], local[(i * 2 + c) * nl + j]);
                }
            }
        }
        Ok(())
    })?;
    Ok(b)
}

/// Load vectors of the constraint data.
#[derive(Debug, Clone)]
pub struct ConstraintData {
    /// `g_i = (μ_i, z)₁`.
    pub g: Vec<f64>,
    /// `f_(c,i) = (ψ_i e_c, z zhat)₁`; `(z zhat, w)₁ = f·w` for any discrete `w`.
    pub zvec_load: Vec<f64>,
}

impl ConstraintData {
    /// `(z zhat, w)₁` for a discrete velocity `w`.
    pub fn zvec_h1(&self, w: &[f64]) -> f64 {
        crate::sparse::dot(&self.zvec_load, w)
    }
}

pub fn assemble_rhs(space: &FESpace, field: &dyn FieldSpec, t: f64, order: usize) -> Result<ConstraintData> {
    let n = space.n_dofs();
    let nl = space.n_local();
    let mut g = vec![0.0; n];
    let mut zvec_load = vec![0.0; 2 * n];
    for_each_element(space, order, |_, dofs, qps| {
        for qp in qps {
            let f = field.sample(qp.point, t)?;
            let zv = f.zvec();
            let gzv = f.grad_zvec();
            for i in 0..nl {
                let w = qp.weight;
                g[dofs[i]] += w * (dot2(qp.grads[i], f.grad_z) + qp.values[i] * f.z);
                for c in 0..2 {
                    zvec_load[c * n + dofs[i]] += w * (dot2(qp.grads[i], gzv[c]) + qp.values[i] * zv[c]);
                }
            }
        }
        Ok(())
    })?;
    Ok(ConstraintData { g, zvec_load })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, DomainSpec};
    use std::sync::Arc;

    fn space(k: usize) -> FESpace {
        let mesh = Arc::new(generate_mesh(&DomainSpec::Square { a: 0.5 }, 0.5).unwrap());
        FESpace::new(mesh, k).unwrap()
    }

    #[test]
    fn constant_strain_energy() {
        for k in 1..=3 {
            let s = space(k);
            let a = assemble_strain(&s, 2 * k);
            let v = s.interpolate_vec(|p| [p.x, 0.0]).unwrap();
            assert!((a.bilinear(&v, &v) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn h1_product_of_x() {
        for k in 1..=3 {
            let s = space(k);
            let m = assemble_h1_scalar(&s, 2 * k);
            let x = s.interpolate(|p| p.x + 0.5).unwrap();
            assert!((m.bilinear(&x, &x) - 4.0 / 3.0).abs() < 1e-12);
            let one = vec![1.0; s.n_dofs()];
            assert!((m.bilinear(&one, &one) - 1.0).abs() < 1e-12);
        }
    }
}
