//! Pseudo-spectral solver for the co-rotational Phan-Thien-Tanner model on the
//! periodic box, with Littlewood-Paley diagnostics.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod lagrangian;
pub mod lp;
pub mod model;
pub mod ops;
pub mod probes;
pub mod random;

pub use error::{Error, Result};
pub use field::{FieldComponents, MatrixField, ScalarField, TensorField, VectorField};
pub use grid::Grid;
pub use lp::{BesovSpec, DyadicBank, ShellRange, TildeNormTracker};
pub use model::{ModelParams, SimState};
