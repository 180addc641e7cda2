//! Preconditioned eigensolvers viewed as Riemannian steepest descent on the
//! sphere, with the diagnostics that predict their convergence.
//!
//! The smallest eigenpair of an SPD matrix `A` (or of a pencil `(K, M)`) is
//! sought with a preconditioner `B`; see the README for a tour.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod par;
pub mod precond;
pub mod problems;
pub mod recipe;
pub mod solvers;

pub use error::{Error, Result};
