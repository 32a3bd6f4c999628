//! Low-rank matrix completion with the Frobenius/nuclear hybrid and
//! bi-nuclear quasi-norms.
//!
//! The two quasi-norms equal the Schatten-2/3 and Schatten-1/2 quasi-norms
//! of `X = UVᵀ` but only need nuclear/Frobenius norms of the thin factors
//! `U` and `V`, so each solver iteration costs SVDs of `m x d` and `n x d`
//! blocks plus `O(|Ω|·d)` sparse work.
//!
//! Modules:
//! - [`linalg`]: thin SVD, spectral norm, nuclear and Frobenius norms
//! - [`quasinorm`]: Schatten quasi-norms, optimal factorizations, trace powers
//! - [`sparse`]: observed-entry storage and the masked residual/gradient kernels
//! - [`palm`]: proximal operators and the two alternating solvers
//! - [`metrics`]: RSE, RMSE, PSNR and recovery-bound diagnostics
//! - [`synthetic`]: random low-rank test instances
//! - [`verify`]: randomized checks of the quasi-norm identities
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]
// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod linalg;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod palm;
pub mod quasinorm;
pub mod rng;
pub mod sparse;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{frobenius_norm, nuclear_norm, spectral_norm, thin_svd, ThinSvd};
pub use matrix::DenseMatrix;
pub use palm::{FactorPair, InitPolicy, SolveError, SolveReport, SolverConfig, StopRule};
pub use quasinorm::Regularizer;
pub use sparse::{SparseObservations, SparseResidual};
