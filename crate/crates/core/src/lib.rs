//! Gauss-Galerkin approximation of one-dimensional Fokker-Planck and
//! nonlinear filtering equations.
//!
//! The law of a scalar diffusion is carried as `N` weighted particles whose
//! first `2N` modified moments evolve under the weak Fokker-Planck equation;
//! at every step the particles are recovered as the Gauss-Christoffel rule
//! of those moments. Observations reweight the particles by Bayes' rule.
//!
//! Reference solvers (exact Kalman, extended Kalman, finite-difference
//! Zakai) live in [`reference`] for validation.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod filter;
pub mod model;
pub mod propagation;
pub mod quadrature;
pub mod reference;
pub mod simulation;

pub use error::{Error, Result};
