//! Moment functionals of the parabolic Anderson model of Skorohod type,
//! driven by a Gaussian noise that is fractional in time with Hurst
//! parameter `H < 1/2` and has spatial covariance `Q`.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be
//! embedded anywhere; parallel drivers, file formats and the command line
//! live in the companion `anderson-lab` crate.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`kernels`] | spatial covariance kernels and sampled hypothesis checks |
//! | [`paths`] | Brownian motions, bridges, pinned paths, path statistics |
//! | [`hnorm`] | inner products of the path functionals `g_{t,x}^B` |
//! | [`moments`] | Feynman–Kac moment estimation, solution draws, exponent fits |
//! | [`events`] | Monte Carlo checks of the lower-bound path events |
//! | [`bounds`] | closed-form constants, optimizers and region logic |
//!
//! All Monte Carlo estimators are functions of `(config, seed)` only. Work is
//! split into fixed-size sample blocks that an [`exec::BlockExecutor`] may run
//! in any order; results are merged in block order, so the worker count
//! never changes a result.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails every domain check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
mod error;
pub mod events;
pub mod exec;
pub mod hnorm;
pub mod kernels;
pub mod linalg;
pub mod math;
pub mod moments;
pub mod paths;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use exec::{BlockExecutor, Sequential};
pub use hnorm::{QuadratureConfig, StepFunctional, TemporalCovariance};
pub use kernels::{CovarianceKernel, KernelKind};
pub use moments::{InitialCondition, MomentConfig, MomentEstimate, Variant};
pub use paths::{PathSample, TimeGrid};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
