//! Level-2 geometric rough-path calculus and rough transport fluid models.

pub mod controlled;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod flow;
pub mod fluid;
pub mod gaussian;
pub mod grid;
pub mod harness;
pub mod io;
pub mod quadrature;
pub mod rough_path;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use rough_path::{GeometricRoughPath, Signature2};
