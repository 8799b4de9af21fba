//! Goal-oriented adaptive finite elements with dual weighted residual
//! estimators for 2D linear and nonlinear elasticity.

pub mod driver;
pub mod dwr;
pub mod elasticity;
pub mod error;
pub mod fem;
pub mod fsi;
pub mod goals;
pub mod hyperelastic;
pub mod mesh;
pub mod tensor;

pub use error::{Error, Result};
