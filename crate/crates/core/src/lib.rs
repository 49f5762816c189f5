//! Scattering data, spectral shift functions and finite-box energy
//! differences for one-dimensional Schrödinger operators H = −d²/dx² + V.

pub mod boundary;
pub mod boxspec;
pub mod detkit;
pub mod error;
pub mod fse;
pub mod jost;
pub mod linalg;
pub mod ode;
pub mod potentials;
pub mod quad;
pub mod ssf;

pub use error::{Error, Result};
pub use linalg::C64;
