//! Semi-supervised learning with a latent energy-based classifier that
//! synthesizes its own training data.
//!
//! A latent-variable generative model (energy-scored latent prior, MLP
//! decoder, amortized Gaussian encoder) is trained jointly from a small
//! labeled set and a large unlabeled set. Midway through training the model
//! starts drawing class-conditional latent samples with short-run Langevin
//! dynamics, decodes them into synthetic examples, discards ambiguous ones by
//! predictive entropy, compresses the survivors with a gradient-matching
//! facility-location coreset, and feeds the weighted remainder back into the
//! classifier loss.
//!
//! Everything is seed-deterministic, including across thread counts: all
//! parallel work pre-assigns one counter-based RNG stream per job.

pub mod augment;
pub mod binio;
pub mod coreset;
pub mod data;
pub mod error;
pub mod model;
pub mod numkernel;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
