//! Adaptive P1 finite elements and rational surrogates for Helmholtz
//! frequency sweeps.

pub mod adaptive;
pub mod analytic;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod overlay;
pub mod rational;

pub use num_complex::Complex64 as C64;
