//! Relaxed proximal splitting algorithms on dense desk-scale problems.
//!
//! Every method is written as a step map `z ↦ (T z, z⁺)` driven by one
//! relaxation loop `z⁺ = z + ρ (T z − z)`. Parameters are checked against
//! the convergence conditions of each method before a run starts.

pub mod engines;
pub mod error;
pub mod problems;
pub mod product;
pub mod prox;
pub mod space;

pub use error::{Error, Result};
pub use prox::{FunSpec, ProxResult, Quadratic, SmoothInfo};
pub use space::{BlockVector, DenseVector, LinOp, Matrix};
