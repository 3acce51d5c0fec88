//! Recursive, constraint-aware input perturbation design for closed-loop
//! ARMAX identification.
//!
//! A known controller regulates an unknown ARMAX plant. At every sample the
//! designer adds a bounded perturbation `d_t` to the control signal, chosen
//! in closed form to maximise the information gained by a recursive
//! prediction error estimator, while keeping the predicted output
//! perturbation within user limits.
//!
//! Modules, bottom up:
//! - [`poly`]: backward-shift polynomials and direct-form filtering.
//! - [`plant`]: ARMAX plant, controller and the closed-loop simulator.
//! - [`sensitivity`]: load sensitivity, impulse response, output constraint.
//! - [`rpem`]: recursive estimator and the information matrix inverse.
//! - [`designer`]: the one-step optimal perturbation.
//! - [`harness`]: experiments, Monte Carlo campaigns, metrics and outputs.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod designer;
pub mod error;
pub mod harness;
pub mod plant;
pub mod poly;
pub mod rpem;
pub mod sensitivity;

pub use error::{Error, Result};
