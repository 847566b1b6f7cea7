//! Estimating group-fairness metrics of a black-box classifier from a small
//! labeled sample and a large unlabeled sample.
//!
//! Three estimators are provided for the difference Δ of a metric (accuracy,
//! TPR or FPR) between two groups:
//!
//! - [`freq`]: plug-in frequencies on the labeled data;
//! - [`beta_binomial`]: conjugate Beta posteriors on the labeled data;
//! - [`bc`]: hierarchical Bayesian calibration of the model's scores, fitted
//!   on the labeled data by MCMC ([`mcmc`]) and applied to the unlabeled
//!   data.
//!
//! [`report::assess`] wraps all three behind one entry point, and [`sim`]
//! holds the synthetic-data generators and experiment harness.

pub mod bc;
pub mod beta_binomial;
pub mod calibration;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod freq;
pub mod mcmc;
pub mod report;
pub mod sim;
pub mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crate::data::{Dataset, GroupId, GroupPair, MetricKind, ScoredExample};
pub use crate::error::{Error, Result};

/// Independent RNG stream `stream` of the master `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    // splitmix64 finalizer over the path
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &p in path {
        h = h.wrapping_add(p.wrapping_mul(0xBF58_476D_1CE4_E5B9)).wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}
