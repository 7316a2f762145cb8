//! Single-constraint stochastic linear programs under a coherent distortion
//! risk constraint.
//!
//! A risk constraint `rho(a'x - b) <= 0` on an empirical sample of `a` is
//! equivalent to `a'x >= b` for every `a` in a weighted-mean trimmed region
//! of the sample. This crate builds that region exactly, solves the robust
//! program by shooting the goal ray against the region's facets, and wraps
//! the machinery in a mean-risk portfolio front-end.

pub mod error;
pub mod geometry;
pub mod io;
pub mod lab;
pub mod portfolio;
pub mod region;
pub mod risk;
pub mod solver;

pub use error::{Error, Result};
pub use region::{Region, Sample};
