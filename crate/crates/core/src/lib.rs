//! Finite element computation of near-isometric velocity fields that move a
//! family of implicitly defined curves, plus particle tracking along them.
//!
//! Given a unit field `zhat` and a normal speed `z`, the solver finds the
//! velocity `u` with smallest strain energy `∫ E(u):E(u)`, `E = ∇u + ∇uᵀ`,
//! among fields with `u·zhat = z`. The constraint is imposed weakly through an
//! H¹ Lagrange multiplier, and rigid motions tangential to `zhat` are fixed by
//! an explicit bordering of the saddle-point matrix.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fespace;
pub mod fields;
pub mod kernel;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod saddle;
pub mod solver;
pub mod sparse;
pub mod tracking;

pub use error::{Error, Result};
pub use mesh::{generate_mesh, refine_uniform, DomainSpec, Mesh, Point2};
