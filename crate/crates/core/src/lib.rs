//! Random-walk statistical tests for covariate-treatment interactions in
//! randomized trial data.
//!
//! The pipeline: ingest a trial ([`data`]), center responses per arm and form
//! modified outcomes ([`preprocess`]), order patients by a covariate and
//! accumulate ([`cumproc`]), evaluate path statistics ([`stats`]), and rank
//! them against Monte-Carlo permutations ([`mc`]) or closed-form Brownian
//! tails ([`dist`]). The [`synth`] module generates the synthetic trial
//! benchmark used to compare test power.

pub mod cumproc;
pub mod data;
pub mod dist;
mod error;
pub mod mc;
pub mod preprocess;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
