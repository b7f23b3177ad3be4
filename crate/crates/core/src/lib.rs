//! Wasserstein gradient flows of higher-order energies on the circle.
//!
//! The crate covers optimal transport between periodic densities on R/Z,
//! the minimizing-movement (JKO) scheme for energies such as the Dirichlet
//! energy (whose flow is the thin-film equation), a method-of-lines PDE
//! solver used to cross-check JKO trajectories, and the displacement
//! convexity machinery (second derivatives along geodesics, restricted
//! lambda-convexity constants, and a non-convexity counterexample).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexity;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod jko;
pub mod par;
pub mod sampling;
pub mod pde;
pub mod transport;

pub use error::{Error, Result};
pub use geometry::{Grid, Method, PeriodicDensity, PeriodicField, Samples};
pub use par::Execution;
