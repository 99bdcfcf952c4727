//! Learning unknown von Neumann measurements from N uses: process-matrix and
//! quantum-comb storage strategies posed as semidefinite programs, with
//! validators and Haar Monte Carlo oracles.

// LAPACK symbols used by the interior-point backend come from system OpenBLAS.
use openblas_src as _;

pub mod cli;
pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod process;
pub mod sdpmodel;
pub mod strategies;
pub mod verify;
