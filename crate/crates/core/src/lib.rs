//! High-order matrix-free finite elements for compressible Neo-Hookean
//! hyperelasticity, solved by Newton–Krylov with p-multigrid preconditioning.

pub mod basis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod operator;
pub mod solver;
pub mod vtk;

pub use error::{Error, Result};
