//! How many labels a frequentist estimate needs to land near the truth.
//!
//! Labeled samples are drawn from the generative model of a
//! [`SyntheticSpec`] through sufficient statistics: multinomial group
//! counts, binomial class counts, then binomial outcome counts at the
//! population's analytic rates.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{GroupPair, MetricKind};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::sim::synthetic::SyntheticSpec;
use crate::{derive_seed, seeded_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequiredNConfig {
    pub metric: MetricKind,
    pub target_interval: (f64, f64),
    pub confidence: f64,
    pub sims: usize,
    pub n_grid: Vec<usize>,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RequiredNConfig {
    fn default() -> Self {
        Self {
            metric: MetricKind::Tpr,
            target_interval: (0.04, 0.06),
            confidence: 0.95,
            sims: 1000,
            n_grid: vec![1_000, 3_000, 6_000, 12_000, 24_000, 48_000, 96_000, 192_000],
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HitRow {
    pub n_labeled: usize,
    pub hit_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RequiredNResult {
    pub metric: MetricKind,
    pub target_interval: (f64, f64),
    pub confidence: f64,
    pub sims: usize,
    pub rows: Vec<HitRow>,
    /// Smallest grid size whose hit fraction reaches `confidence`.
    pub required_n: Option<usize>,
}

impl RequiredNResult {
    pub fn hit_fraction(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n_labeled == n).map(|r| r.hit_fraction)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "n_L", "hit_fraction", "meets_confidence"])?;
        for r in &self.rows {
            w.write_record([
                self.metric.to_string(),
                r.n_labeled.to_string(),
                r.hit_fraction.to_string(),
                (r.hit_fraction >= self.confidence).to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Frequentist Δ of `metric` on one simulated labeled set of size `n`, or
/// `None` when a group's denominator is empty.
pub fn simulate_freq_delta<R: Rng>(
    spec: &SyntheticSpec,
    metric: MetricKind,
    pair: GroupPair,
    n: usize,
    rng: &mut R,
) -> Option<f64> {
    // multinomial group counts by sequential conditional binomials
    let mut remaining = n as u64;
    let mut mass_left = 1.0;
    let mut counts = vec![0u64; spec.groups.len()];
    for (g, gs) in spec.groups.iter().enumerate() {
        let k = if g + 1 == spec.groups.len() {
            remaining
        } else {
            binomial(rng, remaining, (gs.proportion / mass_left).min(1.0))
        };
        counts[g] = k;
        remaining -= k;
        mass_left -= gs.proportion;
    }
    let mut theta = |g: usize| -> Option<f64> {
        let gs = &spec.groups[g];
        let rates = gs.rates();
        let (trials, rate) = match metric {
            MetricKind::Accuracy => (counts[g], rates.accuracy),
            MetricKind::Tpr => (binomial(rng, counts[g], gs.positive_rate), rates.tpr),
            MetricKind::Fpr => (binomial(rng, counts[g], 1.0 - gs.positive_rate), rates.fpr),
        };
        (trials > 0).then(|| binomial(rng, trials, rate) as f64 / trials as f64)
    };
    let u = theta(pair.unprivileged.0);
    let p = theta(pair.privileged.0);
    Some(u? - p?)
}

pub fn required_n_experiment(
    spec: &SyntheticSpec,
    pair: GroupPair,
    config: &RequiredNConfig,
) -> Result<RequiredNResult> {
    spec.validate()?;
    let (lo, hi) = config.target_interval;
    if lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) || config.sims == 0 || config.n_grid.is_empty() {
        return Err(Error::InvalidSpec(
            "required-n needs a non-empty grid, sims > 0 and an ordered interval".into(),
        ));
    }
    if pair.unprivileged.0 >= spec.groups.len() || pair.privileged.0 >= spec.groups.len() {
        return Err(Error::MissingGroup(format!("{pair:?}")));
    }
    let rows = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let hits = map_indexed(config.execution, config.sims, |sim| {
                let mut rng = seeded_rng(derive_seed(config.seed, &[i as u64, sim as u64]), 0);
                simulate_freq_delta(spec, config.metric, pair, n, &mut rng).is_some_and(|d| lo <= d && d <= hi)
            });
            HitRow {
                n_labeled: n,
                hit_fraction: hits.iter().filter(|h| **h).count() as f64 / config.sims as f64,
            }
        })
        .collect::<Vec<_>>();
    let required_n = rows
        .iter()
        .filter(|r| r.hit_fraction >= config.confidence)
        .map(|r| r.n_labeled)
        .min();
    Ok(RequiredNResult {
        metric: config.metric,
        target_interval: config.target_interval,
        confidence: config.confidence,
        sims: config.sims,
        rows,
        required_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::suite::tpr_gap_spec;
    use crate::sim::synthetic::generate;
    use crate::GroupId;

    fn pair() -> GroupPair {
        // majority first so the true gap is +0.05
        GroupPair::new(GroupId(0), GroupId(1)).unwrap()
    }

    #[test]
    fn small_n_misses_the_interval() {
        let cfg = RequiredNConfig {
            sims: 400,
            n_grid: vec![100],
            ..RequiredNConfig::default()
        };
        let r = required_n_experiment(&tpr_gap_spec(1000, 0), pair(), &cfg).unwrap();
        assert!(r.hit_fraction(100).unwrap() < 0.3);
        assert_eq!(r.required_n, None);
    }

    #[test]
    fn equal_rates_exclude_truth() {
        let mut spec = tpr_gap_spec(1000, 0);
        spec.groups[1] = spec.groups[0].clone();
        spec.groups[1].name = "copy".into();
        spec.groups[1].proportion = 0.2;
        spec.groups[0].proportion = 0.8;
        let cfg = RequiredNConfig {
            sims: 300,
            n_grid: vec![1000, 50_000],
            ..RequiredNConfig::default()
        };
        let r = required_n_experiment(&spec, pair(), &cfg).unwrap();
        assert!(r.hit_fraction(50_000).unwrap() < 0.01);
    }

    #[test]
    fn sufficient_statistics_match_full_generation() {
        let spec = tpr_gap_spec(400_000, 3);
        let pop = generate(&spec).unwrap();
        let n = 3000;
        let sims = 400;
        let full: Vec<f64> = (0..sims)
            .filter_map(|i| {
                let (lab, _) = pop.dataset.split_labeled(n, i).unwrap();
                crate::freq::freq_metric(&lab, MetricKind::Tpr, pair()).delta
            })
            .collect();
        let mut rng = seeded_rng(11, 0);
        let fast: Vec<f64> = (0..sims)
            .filter_map(|_| simulate_freq_delta(&spec, MetricKind::Tpr, pair(), n, &mut rng))
            .collect();
        let (mf, ms) = (crate::stats::mean(&full), crate::stats::mean(&fast));
        let (sf, ss) = (crate::stats::variance(&full).sqrt(), crate::stats::variance(&fast).sqrt());
        let se = sf / (sims as f64).sqrt();
        assert!((mf - ms).abs() < 4.0 * se * 2f64.sqrt(), "means {mf} vs {ms}");
        assert!((sf / ss - 1.0).abs() < 0.2, "sd {sf} vs {ss}");
    }
}
