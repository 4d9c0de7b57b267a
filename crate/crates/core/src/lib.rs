//! Utility recovery from finite binary-choice data.
//!
//! The crate simulates noisy and noiseless choices generated by known
//! preferences over monetary lotteries, Anscombe–Aumann acts and Euclidean
//! bundles, fits utilities by maximising the number of rationalised choices,
//! and runs the convergence experiments exposed by the `recovery-lab` CLI.

pub mod aa_prefs;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod lotteries;
pub mod noisy_choice;
pub mod rng;
pub mod wald_env;

pub use error::{Error, Result};
