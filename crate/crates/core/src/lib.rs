//! Monte Carlo machinery for nonlinear stochastic integrals.
//!
//! A nonlinear stochastic integral `∫ M(ds, θ_s)` integrates a predictable
//! strategy `θ` against a *family* of martingales `{M(x)}` indexed by a
//! spatial parameter `x`. This crate simulates the Brownian substrate,
//! evaluates such integrals on a time grid, computes the classical
//! Kunita-Watanabe projection of a payoff, and solves the L² approximation
//! problem `inf_θ E[(H - ∫ M(ds, θ_s))²]` node by node.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. The `parallel` feature spreads per-path work over rayon;
//! results never depend on the worker count.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;
mod math;
mod par;

pub mod family;
pub mod integrate;
pub mod kw;
pub mod optimizer;
pub mod path;
pub mod stats;

pub use error::{Error, Result};
pub use family::{
    DerivativeOf, ExponentialAsPrintedFamily, ExponentialFamily, FamilyKind, LinearFamily,
    MartingaleFamily,
};
pub use integrate::{IntegralResult, StrategyPath};
pub use kw::{Feature, KWDecomposition, Payoff, PayoffKind};
pub use math::{ulp, ulps_apart, NeumaierSum};
pub use path::{
    build_grid, simulate_batch, PathBatch, PathBundle, PathGenerator, PathPrefix, PathSource,
    TimeGrid,
};
pub use stats::MCEstimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
