use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("cell {cell} has zero or non-finite signed area and cannot be reoriented")]
    InvertedCell { cell: usize },
    #[error("boundary edge ({a}, {b}) carries no boundary tag")]
    UntaggedBoundaryEdge { a: usize, b: usize },
    #[error("tagged edge ({a}, {b}) is not a boundary edge of the mesh")]
    TaggedInteriorEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is shared by {count} cells")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("indicator of cell {cell} is invalid ({value})")]
    InvalidIndicator { cell: usize, value: f64 },
    #[error("Dörfler fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),
    #[error("no quadrature rule of order {0} (supported: 0..=8)")]
    UnsupportedQuadrature(usize),
    #[error("boundary tag {0} does not occur in the mesh")]
    UnknownBoundaryTag(i32),
    #[error("region {0} does not occur in the mesh")]
    UnknownRegion(i32),
    #[error("no material given for region {0}")]
    MissingMaterial(i32),
    #[error("matrix is singular (zero pivot near dof {dof})")]
    SingularMatrix { dof: usize },
    #[error("spaces are defined on different meshes")]
    MeshMismatch,
    #[error("incompatible spaces: {0}")]
    IncompatibleSpaces(String),
    #[error("inverted element in cell {cell} (det F = {det:.3e})")]
    InvertedElement { cell: usize, det: f64 },
    #[error("Gent locking limit reached in cell {cell} (I1 - 3 = {value:.4} >= Jm)")]
    GentSingularity { cell: usize, value: f64 },
    #[error("Newton method failed at load step {step}: {reason}")]
    NewtonDiverged { step: usize, reason: String },
    #[error("goal is nonlinear; use the linearized (adjoint) assembly path")]
    NonlinearGoal,
    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutside { x: f64, y: f64 },
    #[error("degenerate coupling coefficient 1 + div u = {value:.3e} in cell {cell}")]
    DegenerateCoefficient { cell: usize, value: f64 },
    #[error("reference error must be positive, got {0}")]
    ZeroReferenceError(f64),
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
