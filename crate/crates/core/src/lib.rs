//! Approximate semidefinite equalization for non-coherent differential UWB links.

mod barrier;
pub mod ber;
pub mod error;
pub mod lp;
pub mod sdp;
pub mod selftest;
pub mod symmat;
pub mod uwb;
pub mod volterra;

pub use error::{Error, Result};
pub use symmat::{EigDecomp, SymMat};
