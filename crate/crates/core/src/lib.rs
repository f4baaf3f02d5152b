//! Stability certificates for the damped third-order semilinear equation
//!
//! ```text
//! -ε(t) u_xxt + u_tt - C(t) u_xx + (a' + a) u_t = F(u)   on (0, π)
//! ```
//!
//! with homogeneous Dirichlet conditions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod exprlang;
pub mod ext;
pub mod grid;
pub mod liapunov;
pub mod presets;
pub mod problem;
pub mod quad;
pub mod solver;
pub mod thresholds;

pub use error::{Error, Result};
pub use ext::{Extended, Provenance, Quantity};
pub use grid::{d_norm, Grid, GridState};
pub use problem::{ProblemSource, ProblemSpec};
