use crate::mesh::Point2;

/// Errors produced by the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate level set: |grad phi| = {norm:.3e} < {c_min:.3e} at ({x}, {y})", x = point.x, y = point.y)]
    Degenerate { point: Point2, norm: f64, c_min: f64 },

    #[error("non-finite value at ({x}, {y})", x = point.x, y = point.y)]
    NonFinite { point: Point2 },

    #[error("point ({x}, {y}) lies outside the mesh", x = point.x, y = point.y)]
    OutsideMesh { point: Point2 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("kernel misdetection: {0} (try a different detection threshold tau)")]
    KernelMisdetection(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
