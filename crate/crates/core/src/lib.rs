//! Randomized-measurement estimation of purities and second-order Rényi
//! entropies, together with an exact simulator for long-range XY spin-chain
//! quenches that produces measurement records in the same format as
//! laboratory data.
//!
//! Module map:
//! - [`qstate`]: dense states, partial traces, exact purities.
//! - [`randunitary`]: Haar-random local unitaries, angle decomposition, pulse compilation.
//! - [`dynamics`]: XY Hamiltonian with disorder and block-structured time evolution.
//! - [`sampler`]: randomized-measurement records from simulated states.
//! - [`estimator`]: unbiased purity estimators, entropies, mutual information, jackknife errors.
//! - [`studies`]: scaling, disorder and diagnostics harnesses.
//! - [`io`], [`config`], [`cli`]: file formats and the command-line tool.

pub mod error;
pub mod linalg;
pub mod qstate;
pub mod randunitary;
pub mod dynamics;
pub mod sampler;
pub mod stats;
pub mod estimator;
pub mod studies;
pub mod io;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
