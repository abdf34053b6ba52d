//! Sparse identification of ODE systems from noisy trajectories: adaptive
//! lasso screening followed by Bayesian credible-interval term selection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod library;
pub mod linalg;
pub mod ode;
pub mod pipeline;
pub mod screen;
pub mod seed;
pub mod smoothing;
pub mod stlsq;
pub mod trajectory;

pub use error::{Error, Result};
