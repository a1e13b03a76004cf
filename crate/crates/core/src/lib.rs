//! Deterministic realization of randomized stationary policies in atomless,
//! uniformly absorbing multi-criteria MDPs on `[0, 1]`.
//!
//! Models have piecewise-constant kernels and rewards, so state marginals of
//! interval-partitioned policies stay piecewise uniform and every construction
//! is evaluated exactly, with certified truncation errors.

pub mod cli;
pub mod derandomize;
pub mod error;
pub mod lyapunov;
pub mod measure;
pub mod model;
pub mod occupancy;
pub mod policy;
pub mod scalar_dp;

pub use error::{Error, Result};
