//! Numerical solver for the singular mean-field Liouville equation on
//! triangulated surfaces with conical points and geodesic boundary.

pub mod bubbles;
pub mod error;
pub mod fem;
pub mod field;
pub mod functional;
pub mod generate;
pub mod geodesic;
pub mod green;
pub mod linalg;
pub mod mesh;
pub mod probe;
pub mod quadrature;
pub mod solvers;
pub mod spectrum;

pub use error::{Error, Result};
pub use field::Field;
pub use mesh::{Cone, ConeSet, SurfaceMesh};
