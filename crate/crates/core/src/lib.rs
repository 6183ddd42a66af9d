//! Sampling of generalized Whittle–Matérn Gaussian random fields on the unit
//! interval with finite elements and sinc quadrature, together with the error
//! functionals and convergence studies used to validate the samplers.

pub mod error;
pub mod errors;
pub mod fem1d;
pub mod fracop;
pub mod linalg;
pub mod quadrature;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
