//! Conjugate beta-binomial estimation of per-group metrics.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupId, GroupPair, MetricKind};
use crate::error::{Error, Result};
use crate::freq::metric_counts;
use crate::seeded_rng;

pub const DEFAULT_BB_SAMPLES: usize = 800;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl BetaPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.alpha) && ok(self.beta) {
            Ok(())
        } else {
            Err(Error::InvalidPrior(format!(
                "beta prior needs positive parameters, got ({}, {})",
                self.alpha, self.beta
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPosterior {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let dist = Beta::new(self.alpha, self.beta).expect("positive beta parameters");
        (0..n).map(|_| dist.sample(rng)).collect()
    }
}

/// Draws of per-group metrics and their difference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorSamples {
    pub pair: GroupPair,
    pub theta: BTreeMap<GroupId, Vec<f64>>,
    pub delta: Vec<f64>,
}

impl PosteriorSamples {
    pub fn from_thetas(pair: GroupPair, unprivileged: Vec<f64>, privileged: Vec<f64>) -> Self {
        assert_eq!(unprivileged.len(), privileged.len());
        let delta = unprivileged.iter().zip(&privileged).map(|(a, b)| a - b).collect();
        let theta = BTreeMap::from([
            (pair.unprivileged, unprivileged),
            (pair.privileged, privileged),
        ]);
        Self { pair, theta, delta }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn mean_delta(&self) -> Option<f64> {
        (!self.delta.is_empty()).then(|| self.delta.iter().sum::<f64>() / self.delta.len() as f64)
    }
}

pub fn bb_posterior(
    labeled: &Dataset,
    metric: MetricKind,
    group: GroupId,
    prior: BetaPrior,
) -> Result<BetaPosterior> {
    prior.validate()?;
    let counts = metric_counts(labeled, metric, group);
    Ok(BetaPosterior {
        alpha: prior.alpha + counts.successes as f64,
        beta: prior.beta + counts.failures() as f64,
    })
}

/// Independent posterior draws for both groups, differenced per draw.
/// Each group uses its own RNG stream derived from `seed`.
pub fn bb_delta_samples(
    labeled: &Dataset,
    metric: MetricKind,
    pair: GroupPair,
    samples: usize,
    seed: u64,
    prior: BetaPrior,
) -> Result<PosteriorSamples> {
    let post_u = bb_posterior(labeled, metric, pair.unprivileged, prior)?;
    let post_p = bb_posterior(labeled, metric, pair.privileged, prior)?;
    let theta_u = post_u.sample(&mut seeded_rng(seed, 1), samples);
    let theta_p = post_p.sample(&mut seeded_rng(seed, 2), samples);
    Ok(PosteriorSamples::from_thetas(pair, theta_u, theta_p))
}
