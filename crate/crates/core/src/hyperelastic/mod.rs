//! Finite-strain hyperelasticity: constitutive laws with optional fiber
//! activation, mixed displacement/pressure formulation and Newton solver.

pub mod material;
pub mod solver;

pub use material::{pk1, ActiveTension, HyperMaterial, Law, PointResponse};
pub use solver::{HyperProblem, HyperSolution, NewtonConfig};
