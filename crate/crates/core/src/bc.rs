//! Bayesian-calibration estimates of group metrics: labeled outcomes are
//! combined with calibrated unlabeled scores, one posterior draw at a time.
//!
//! For a draw with calibration `f_g`, and `p_j = f_g(s_j)`:
//!
//! - accuracy: `(sum_lab 1[pred = y] + sum_unlab z_j) / (n_L,g + n_U,g)`, with
//!   `z_j = p_j` when `s_j >= 0.5` and `1 - p_j` otherwise;
//! - TPR: `(TP_lab + sum_unlab 1[pred] p_j) / (P_lab + sum_unlab p_j)`;
//! - FPR: `(FP_lab + sum_unlab 1[pred] (1 - p_j)) / (N_lab + sum_unlab (1 - p_j))`.
//!
//! Ratios are taken inside each draw. Draws whose TPR/FPR denominator is
//! below [`MIN_DENOMINATOR`] are skipped.

use serde::Serialize;

use crate::beta_binomial::PosteriorSamples;
use crate::calibration::{sigmoid, CalibrationParams};
use crate::data::{Dataset, GroupId, GroupPair, MetricKind};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::mcmc::{CalibrationPosterior, PosteriorDraw};

pub const MIN_DENOMINATOR: f64 = 1e-9;

/// Fraction of skipped draws above which an estimate is flagged.
pub const SKIP_FLAG_FRACTION: f64 = 0.10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct LabeledTally {
    n: usize,
    correct: usize,
    positives: usize,
    true_positives: usize,
    negatives: usize,
    false_positives: usize,
}

/// Sums of calibrated probabilities over a group's unlabeled scores, split
/// by hard prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UnlabeledSums {
    pub predicted_pos: usize,
    pub predicted_neg: usize,
    /// Sum of `p_j` over examples predicted positive.
    pub prob_pos: f64,
    /// Sum of `p_j` over examples predicted negative.
    pub prob_neg: f64,
}

#[derive(Clone, Debug, Default)]
struct UnlabeledScores {
    /// `ln s` and `ln(1 - s)` with predicted-positive examples first.
    log_s: Vec<f64>,
    log_1ms: Vec<f64>,
    predicted_pos: usize,
}

impl UnlabeledScores {
    fn sums(&self, p: &CalibrationParams) -> UnlabeledSums {
        let prob = |i: usize| sigmoid(p.log_odds(self.log_s[i], self.log_1ms[i]));
        let k = self.predicted_pos;
        let prob_pos = (0..k).map(prob).sum();
        let prob_neg = (k..self.log_s.len()).map(prob).sum();
        UnlabeledSums {
            predicted_pos: k,
            predicted_neg: self.log_s.len() - k,
            prob_pos,
            prob_neg,
        }
    }
}

/// Preprocessed labeled and unlabeled data of every group.
#[derive(Clone, Debug)]
pub struct BcData {
    labeled: Vec<LabeledTally>,
    unlabeled: Vec<UnlabeledScores>,
}

impl BcData {
    pub fn new(labeled: &Dataset, unlabeled: &Dataset) -> Self {
        let groups = labeled.num_groups().max(unlabeled.num_groups());
        let mut tally = vec![LabeledTally::default(); groups];
        for ex in labeled.examples() {
            let Some(y) = ex.label else { continue };
            let t = &mut tally[ex.group.0];
            let pred = ex.prediction();
            t.n += 1;
            t.correct += (pred == y) as usize;
            if y {
                t.positives += 1;
                t.true_positives += pred as usize;
            } else {
                t.negatives += 1;
                t.false_positives += pred as usize;
            }
        }
        let mut pos: Vec<Vec<f64>> = vec![Vec::new(); groups];
        let mut neg: Vec<Vec<f64>> = vec![Vec::new(); groups];
        for ex in unlabeled.examples() {
            if ex.prediction() {
                pos[ex.group.0].push(ex.score);
            } else {
                neg[ex.group.0].push(ex.score);
            }
        }
        let unlabeled = pos
            .into_iter()
            .zip(neg)
            .map(|(p, n)| {
                let predicted_pos = p.len();
                let scores: Vec<f64> = p.into_iter().chain(n).collect();
                UnlabeledScores {
                    log_s: scores.iter().map(|s| s.ln()).collect(),
                    log_1ms: scores.iter().map(|s| (-s).ln_1p()).collect(),
                    predicted_pos,
                }
            })
            .collect();
        Self {
            labeled: tally,
            unlabeled,
        }
    }

    pub fn unlabeled_sums(&self, group: GroupId, params: &CalibrationParams) -> UnlabeledSums {
        self.unlabeled[group.0].sums(params)
    }

    /// Metric of `group` given precomputed unlabeled sums.
    pub fn theta_from_sums(&self, group: GroupId, metric: MetricKind, u: &UnlabeledSums) -> Result<f64> {
        let t = &self.labeled[group.0];
        let (num, den) = match metric {
            MetricKind::Accuracy => {
                let den = (t.n + u.predicted_pos + u.predicted_neg) as f64;
                if den == 0.0 {
                    return Err(Error::EmptyGroup(group.0));
                }
                let z = u.prob_pos + (u.predicted_neg as f64 - u.prob_neg);
                (t.correct as f64 + z, den)
            }
            MetricKind::Tpr => (
                t.true_positives as f64 + u.prob_pos,
                t.positives as f64 + (u.prob_pos + u.prob_neg),
            ),
            MetricKind::Fpr => {
                let neg_pos = u.predicted_pos as f64 - u.prob_pos;
                let neg_neg = u.predicted_neg as f64 - u.prob_neg;
                (t.false_positives as f64 + neg_pos, t.negatives as f64 + (neg_pos + neg_neg))
            }
        };
        if den < MIN_DENOMINATOR {
            return Err(Error::DegenerateDenominator(group.0));
        }
        Ok(num / den)
    }

    pub fn theta(&self, group: GroupId, metric: MetricKind, params: &CalibrationParams) -> Result<f64> {
        self.theta_from_sums(group, metric, &self.unlabeled_sums(group, params))
    }
}

/// Accuracy of `group` under one posterior draw.
pub fn bc_theta_accuracy(
    labeled: &Dataset,
    unlabeled: &Dataset,
    draw: &PosteriorDraw,
    group: GroupId,
) -> Result<f64> {
    BcData::new(labeled, unlabeled).theta(group, MetricKind::Accuracy, &draw.groups[group.0])
}

/// TPR or FPR of `group` under one posterior draw (accuracy is accepted too).
pub fn bc_theta_conditional(
    labeled: &Dataset,
    unlabeled: &Dataset,
    draw: &PosteriorDraw,
    group: GroupId,
    metric: MetricKind,
) -> Result<f64> {
    BcData::new(labeled, unlabeled).theta(group, metric, &draw.groups[group.0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BcSamples {
    pub metric: MetricKind,
    pub samples: PosteriorSamples,
    /// Draws dropped because a denominator vanished.
    pub skipped: usize,
    pub flagged: bool,
}

pub fn bc_delta_samples(
    labeled: &Dataset,
    unlabeled: &Dataset,
    posterior: &CalibrationPosterior,
    metric: MetricKind,
    pair: GroupPair,
) -> Result<BcSamples> {
    let data = BcData::new(labeled, unlabeled);
    let mut out = bc_delta_samples_multi(&data, posterior, &[metric], pair, Execution::default())?;
    Ok(out.remove(0))
}

/// Δ draws for several metrics, sharing one pass over the unlabeled scores
/// per draw and group.
pub fn bc_delta_samples_multi(
    data: &BcData,
    posterior: &CalibrationPosterior,
    metrics: &[MetricKind],
    pair: GroupPair,
    exec: Execution,
) -> Result<Vec<BcSamples>> {
    let per_draw = map_indexed(exec, posterior.len(), |t| {
        let draw = &posterior.draws[t];
        let su = data.unlabeled_sums(pair.unprivileged, &draw.groups[pair.unprivileged.0]);
        let sp = data.unlabeled_sums(pair.privileged, &draw.groups[pair.privileged.0]);
        metrics
            .iter()
            .map(|&m| {
                let u = data.theta_from_sums(pair.unprivileged, m, &su);
                let p = data.theta_from_sums(pair.privileged, m, &sp);
                match (u, p) {
                    (Ok(u), Ok(p)) => Ok(Some((u, p))),
                    (Err(Error::DegenerateDenominator(_)), _)
                    | (_, Err(Error::DegenerateDenominator(_))) => Ok(None),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    });
    let per_draw = per_draw.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(metrics
        .iter()
        .enumerate()
        .map(|(i, &metric)| {
            let (mut tu, mut tp) = (Vec::with_capacity(per_draw.len()), Vec::with_capacity(per_draw.len()));
            for (u, p) in per_draw.iter().filter_map(|d| d[i]) {
                tu.push(u);
                tp.push(p);
            }
            let skipped = per_draw.len() - tu.len();
            BcSamples {
                metric,
                samples: PosteriorSamples::from_thetas(pair, tu, tp),
                skipped,
                flagged: skipped as f64 > SKIP_FLAG_FRACTION * per_draw.len() as f64,
            }
        })
        .collect())
}
