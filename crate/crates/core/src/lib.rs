#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod grid;
pub mod norms;
pub mod ops;

pub use error::{Result, SqgError};
pub use field::{SpectralField, VectorField};
pub use grid::Grid;
pub mod checkpoint;
pub mod condition;
pub mod data;
pub mod diagnostics;
pub mod evolution;
pub mod experiment;
pub mod inequalities;
pub mod quadrature;
pub mod random;
