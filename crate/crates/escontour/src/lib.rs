//! Estimation-error landscape of Expected-Shortfall-optimized portfolios.
//!
//! The crate has two independent routes to the same quantities and a mapping
//! layer on top:
//!
//! * [`replica`] solves the reduced saddle-point conditions for the order
//!   parameters (q0, Delta, epsilon) of the large-N theory at a control point
//!   (alpha, r = N/T), and derives the financial error metrics from them.
//! * [`analytic`] carries the closed-form and perturbative solutions on the
//!   special lines (r -> 0, alpha = 1/2, epsilon = 0, minimax alpha = 1),
//!   used as fast paths and as independent oracles for the generic solver.
//! * [`parametric`] holds the closed-form results for parametric (Gaussian-fit)
//!   ES estimates: error factor, critical ratio and contour inversion.
//! * [`simulate`] is the Monte Carlo verification engine: synthetic return
//!   panels, an exact simplex solution of the Rockafellar-Uryasev linear
//!   program, and ensemble statistics for every theory prediction.
//! * [`map`] produces the landscape artifacts: metric grids, traced contour
//!   lines, phase boundaries and required-sample-size tables.

// Negated comparisons like `!(x > 0.0)` are used throughout the input
// validation on purpose: they reject NaN, which `x <= 0.0` would admit.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod map;
pub mod parametric;
pub mod replica;
pub mod roots;
pub mod simplex;
pub mod simulate;
pub mod specfun;

pub use error::{Error, Result};
