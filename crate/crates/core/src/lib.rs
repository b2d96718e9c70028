//! Simulation engine for a dimensional-shift contextual bandit.
//!
//! Four learners are compared on the same task stream:
//!
//! - `frl`: feature reinforcement learning (per-feature delta rule, decay, softmax)
//! - `wrl`: `frl` with per-dimension weights driven by reward prediction error
//! - `ibl`: instance-based learning (power-law activation, partial matching, blending)
//! - `wibl`: `ibl` whose similarity weights come from the mutual information
//!   between each dimension and the utility outcome over the whole memory
//!
//! The [`harness`] runs agents for every (model, shift, feedback) cell and
//! aggregates learning curves; [`report`] writes and reads the CSV outputs.

pub mod config;
pub mod env;
mod error;
pub mod frl;
pub mod harness;
pub mod ibl;
pub mod learner;
pub mod mi;
pub mod report;
pub mod seed;

pub use error::{Error, Result};
