//! Empirical check of the BC error bound on a population with known true
//! calibration: the error of the posterior-mean accuracy gap is at most the
//! L1 distances between posterior-mean and true calibration curves, plus
//! Monte Carlo noise.

use serde::Serialize;

use crate::bc::{bc_delta_samples_multi, BcData};
use crate::calibration::{calibrate, PriorConfig};
use crate::data::{GroupId, GroupPair, MetricKind};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::mcmc::{sample_posterior, CalibrationPosterior, SamplerConfig};
use crate::sim::synthetic::SyntheticPopulation;
use crate::stats::std_error;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBoundCheck {
    pub estimate: f64,
    pub truth: f64,
    pub error: f64,
    /// `‖f̄_g − f*_g‖₁` for the unprivileged and privileged group.
    pub l1: (f64, f64),
    /// Combined posterior Monte Carlo and realized-label standard error.
    pub stderr: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Mean over the group's population scores of `|f̄(s) − f*(s)|`.
fn l1_distance(pop: &SyntheticPopulation, post: &CalibrationPosterior, g: GroupId, exec: Execution) -> f64 {
    let truth = pop.true_calibration(g);
    let scores: Vec<f64> = pop.dataset.in_group(g).map(|e| e.score).collect();
    let per = map_indexed(exec, scores.len(), |i| {
        let s = scores[i];
        let mean = post.draws.iter().map(|d| calibrate(s, &d.groups[g.0])).sum::<f64>() / post.len() as f64;
        (mean - truth.honest(s)).abs()
    });
    per.iter().sum::<f64>() / scores.len().max(1) as f64
}

/// Splits the population, fits BC on `n_labeled` labels and compares the
/// posterior-mean accuracy gap with the population gap.
pub fn error_bound_check(
    pop: &SyntheticPopulation,
    pair: GroupPair,
    n_labeled: usize,
    prior: &PriorConfig,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<ErrorBoundCheck> {
    let truth = pop
        .truth(MetricKind::Accuracy, pair)
        .ok_or_else(|| Error::InvalidSpec("population accuracy gap is undefined".into()))?;
    let (labeled, unlabeled) = pop.dataset.split_labeled(n_labeled, derive_seed(seed, &[0]))?;
    let sampler = sampler.clone().with_seed(derive_seed(seed, &[1]));
    let post = sample_posterior(&labeled, prior, &sampler)?;
    let data = BcData::new(&labeled, &unlabeled);
    let bc = bc_delta_samples_multi(&data, &post, &[MetricKind::Accuracy], pair, sampler.execution)?.remove(0);
    let delta = &bc.samples.delta;
    if delta.is_empty() {
        return Err(Error::DegenerateDenominator(pair.unprivileged.0));
    }
    let estimate = crate::stats::mean(delta);

    // realized labels of the unlabeled pool scatter around f*
    let label_noise = |g: GroupId| {
        let n_g = pop.dataset.in_group(g).count() as f64;
        let cal = pop.true_calibration(g);
        let var: f64 = unlabeled
            .in_group(g)
            .map(|e| {
                let f = cal.honest(e.score);
                f * (1.0 - f)
            })
            .sum();
        var.sqrt() / n_g
    };
    let mc = std_error(delta);
    let stderr = (mc * mc + label_noise(pair.unprivileged).powi(2) + label_noise(pair.privileged).powi(2)).sqrt();
    let l1 = (
        l1_distance(pop, &post, pair.unprivileged, sampler.execution),
        l1_distance(pop, &post, pair.privileged, sampler.execution),
    );
    let bound = l1.0 + l1.1 + 4.0 * stderr;
    let error = (estimate - truth).abs();
    Ok(ErrorBoundCheck {
        estimate,
        truth,
        error,
        l1,
        stderr,
        bound,
        holds: error <= bound,
    })
}
