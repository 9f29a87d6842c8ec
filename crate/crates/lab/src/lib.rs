//! Experiment runner for `anderson-core`: a rayon executor, JSON configs,
//! CSV result files, run manifests and the studies behind the
//! `anderson-moments` command line.

pub mod cli;
pub mod config;
pub mod io;
pub mod pool;
pub mod study;
pub mod validate;

pub use config::{Command, ExperimentConfig, KernelSpec, U0Spec};
pub use pool::Pool;
pub use study::{run, Outcome};
