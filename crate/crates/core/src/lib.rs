//! Strict deformation quantization of Lagrangian torus fibrations `ℝⁿ×Tⁿ`
//! and their torus quotients, evaluated on Bohr-Sommerfeld lattices.

pub mod error;
pub mod experiment;
pub mod fields;
pub mod hilbert;
pub mod jet;
pub mod norm;
pub mod quadrature;
pub mod quantizer;
pub mod star;
pub mod toeplitz;

pub use error::{Error, Result};
