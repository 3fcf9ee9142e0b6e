//! Level-set basis pursuit denoise with nonsmooth (`l0`, `l1`, `l2`, `linf`)
//! residual constraints, solved through relaxation, proximal splitting and
//! continuation, plus a factorized low-rank extension for matrix completion
//! and denoising.

pub mod error;
pub mod harness;
pub mod io;
pub mod lowrank;
pub mod operators;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
