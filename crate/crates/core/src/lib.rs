//! Disordered Heisenberg chains: exact diagonalization, shift-and-invert MPS
//! eigenstates, and entanglement indicators of many-body localization.

pub mod dense;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod runner;
pub mod scaling;
pub mod simps;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
