//! Lagrange finite elements: quadrature, shape functions, spaces with
//! Dirichlet constraints, sparse assembly and solves, and transfers between
//! spaces of different degree.

pub mod assembly;
pub mod basis;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod transfer;

pub use assembly::{assemble, assemble_load, assemble_scalar, solve_on, CellValues, EdgeRule, LocalSystem};
pub use basis::{element, LagrangeElement, Tabulation};
pub use quadrature::{triangle as quadrature, Quadrature};
pub use space::{CellGeometry, DirichletBc, Field, Space};
pub use sparse::{solve, CsrMatrix, SparseSystem, TripletBuilder};
pub use transfer::{extrapolate, interpolate, prolongate};
