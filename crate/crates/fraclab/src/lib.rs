//! Numerical laboratory for time-fractional non-autonomous Cauchy problems
//! `∂_t^α u + A(t)u = f` posed on a Gelfand triple `V ↪ H ↪ V′`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line surface live in the `fraclab-cli` companion crate.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style guards are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod counterexample;
pub mod error;
pub mod fracops;
pub mod funcalc;
pub mod linalg;
pub mod mlf;
pub mod quad;
pub mod reglab;
pub mod special;
pub mod triple;
pub mod volterra;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
