//! Hybrid iterative solvers that alternate a stationary smoother with a learned
//! correction operator, for 1D parametric diffusion and Helmholtz problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`problems`]: grids, Gaussian random fields, finite-difference assembly,
//!   reference solves, grid transfer and on-disk instance datasets.
//! * [`smoothers`]: damped Jacobi / Gauss–Seidel sweeps and dense propagation
//!   diagnostics.
//! * [`tape`]: a small reverse-mode tape used for all parameter gradients.
//! * [`neural`]: DeepONet-style and spectral correction operators.
//! * [`training`]: norms, static and unrolled objectives, optimizers.
//! * [`acceleration`]: step-size rules and Anderson-type mixing.
//! * [`solver`]: the hybrid fixed-point loop and convergence traces.

// `!(x >= 0.0)` rejects NaN along with negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceleration;
pub mod error;
pub mod neural;
pub mod par;
pub mod problems;
pub mod smoothers;
pub mod solver;
pub mod tape;
pub mod training;

pub use error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
