//! Plasma-sheath solver for the nonisentropic Euler–Poisson system.
//!
//! The crate computes monotone stationary sheath profiles on a half line,
//! evolves small perturbations of them over a wall given by the graph
//! `x₁ = M(x₂)`, and extracts stationary solutions over the perturbed wall
//! as long-time limits.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod background;
pub mod banded;
pub mod boundary;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod grid;
pub mod halfline;
pub mod io;
pub mod limit;
pub mod matrices;
pub mod norms;
pub mod params;
pub mod problem;
pub mod state;

pub use boundary::{BoundaryProfile, Bump};
pub use error::{Error, Result};
pub use grid::Grid;
pub use params::PlasmaParams;
pub use state::FieldState;
