//! Numerical homogenization of Stokes flow in perforated domains.

pub mod cache;
pub mod cellproblem;
pub mod cli;
pub mod compressible;
pub mod darcy;
pub mod error;
pub mod forcing;
pub mod functional;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod stokes;
pub mod testfn;
pub mod vec3;

pub use error::{Error, Result};
