//! Numerical laboratory for the free scalar field in two dimensions: Weyl
//! algebra bookkeeping, Klein-Gordon dynamics on sampled test functions,
//! scaling-limit diagnostics, charged-sector phases and the kernel estimates
//! behind quasi-equivalence of massive and massless vacua.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod quasiequiv;
pub mod scalinglimit;
pub mod sectors;
pub mod special;
pub mod testfn;
pub mod weyl;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use testfn::{Grid, GridFunction, MassNormValue};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
