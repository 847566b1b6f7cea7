//! Assessment reports: point estimate, credible interval, direction and
//! practical-fairness probabilities for Δ.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bc::{bc_delta_samples_multi, BcData};
use crate::beta_binomial::{bb_delta_samples, BetaPrior, DEFAULT_BB_SAMPLES};
use crate::calibration::PriorConfig;
use crate::data::{Dataset, GroupPair, MetricKind};
use crate::error::Result;
use crate::freq::freq_metric;
use crate::mcmc::{sample_posterior, CalibrationPosterior, SamplerConfig};
use crate::stats::equal_tailed_interval;

pub const DEFAULT_EPSILON: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Freq,
    Bb,
    Bc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Freq => "freq",
            Method::Bb => "bb",
            Method::Bc => "bc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "freq" => Ok(Method::Freq),
            "bb" => Ok(Method::Bb),
            "bc" => Ok(Method::Bc),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssessConfig {
    pub epsilon: f64,
    pub seed: u64,
    pub bb_prior: BetaPrior,
    pub bb_samples: usize,
    pub prior: PriorConfig,
    pub sampler: SamplerConfig,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            bb_prior: BetaPrior::default(),
            bb_samples: DEFAULT_BB_SAMPLES,
            prior: PriorConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedPair {
    pub unprivileged: String,
    pub privileged: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub metric: MetricKind,
    pub pair: NamedPair,
    pub method: Method,
    pub point_estimate: Option<f64>,
    pub ci_95: Option<(f64, f64)>,
    pub p_delta_positive: Option<f64>,
    pub p_practically_fair: Option<f64>,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub n_l: usize,
    pub n_u: usize,
    /// BC draws dropped for a vanishing TPR/FPR denominator.
    pub skipped_draws: usize,
    /// More than 10% of draws were dropped.
    pub flagged: bool,
}

/// Posterior summaries of a list of Δ draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaSummary {
    pub mean: f64,
    pub ci_95: (f64, f64),
    pub p_positive: f64,
    pub p_practically_fair: f64,
}

pub fn summarize(delta: &[f64], epsilon: f64) -> Option<DeltaSummary> {
    if delta.is_empty() {
        return None;
    }
    let n = delta.len() as f64;
    Some(DeltaSummary {
        mean: delta.iter().sum::<f64>() / n,
        ci_95: equal_tailed_interval(delta, 0.95),
        p_positive: delta.iter().filter(|d| **d > 0.0).count() as f64 / n,
        p_practically_fair: delta.iter().filter(|d| d.abs() < epsilon).count() as f64 / n,
    })
}

impl AssessmentReport {
    pub const CSV_HEADER: [&'static str; 15] = [
        "metric",
        "unprivileged",
        "privileged",
        "method",
        "point_estimate",
        "ci_low",
        "ci_high",
        "p_delta_positive",
        "p_practically_fair",
        "epsilon",
        "T",
        "n_L",
        "n_U",
        "skipped_draws",
        "flagged",
    ];

    fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.metric.to_string(),
            self.pair.unprivileged.clone(),
            self.pair.privileged.clone(),
            self.method.to_string(),
            opt(self.point_estimate),
            opt(self.ci_95.map(|c| c.0)),
            opt(self.ci_95.map(|c| c.1)),
            opt(self.p_delta_positive),
            opt(self.p_practically_fair),
            self.epsilon.to_string(),
            self.t.to_string(),
            self.n_l.to_string(),
            self.n_u.to_string(),
            self.skipped_draws.to_string(),
            self.flagged.to_string(),
        ]
    }

    /// Header line plus one data row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_fields())?;
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Outcome of [`assess`], with the calibration posterior when BC ran.
pub struct Assessment {
    pub report: AssessmentReport,
    pub posterior: Option<CalibrationPosterior>,
}

/// Estimates Δ of `metric` for `pair` from a dataset whose unlabeled rows
/// have an empty label.
pub fn assess(
    dataset: &Dataset,
    metric: MetricKind,
    pair: GroupPair,
    method: Method,
    config: &AssessConfig,
) -> Result<Assessment> {
    let labeled = dataset.labeled();
    let unlabeled = dataset.unlabeled();
    let mut report = AssessmentReport {
        metric,
        pair: NamedPair {
            unprivileged: dataset.group_name(pair.unprivileged).to_string(),
            privileged: dataset.group_name(pair.privileged).to_string(),
        },
        method,
        point_estimate: None,
        ci_95: None,
        p_delta_positive: None,
        p_practically_fair: None,
        epsilon: config.epsilon,
        t: 0,
        n_l: labeled.len(),
        n_u: unlabeled.len(),
        skipped_draws: 0,
        flagged: false,
    };
    let mut posterior = None;
    let delta = match method {
        Method::Freq => {
            report.point_estimate = freq_metric(&labeled, metric, pair).delta;
            return Ok(Assessment { report, posterior });
        }
        Method::Bb => {
            bb_delta_samples(&labeled, metric, pair, config.bb_samples, config.seed, config.bb_prior)?.delta
        }
        Method::Bc => {
            let sampler = config.sampler.clone().with_seed(config.seed);
            let post = sample_posterior(&labeled, &config.prior, &sampler)?;
            let data = BcData::new(&labeled, &unlabeled);
            let mut out = bc_delta_samples_multi(&data, &post, &[metric], pair, sampler.execution)?;
            let bc = out.remove(0);
            report.skipped_draws = bc.skipped;
            report.flagged = bc.flagged;
            posterior = Some(post);
            bc.samples.delta
        }
    };
    report.t = delta.len();
    if let Some(s) = summarize(&delta, config.epsilon) {
        report.point_estimate = Some(s.mean);
        report.ci_95 = Some(s.ci_95);
        report.p_delta_positive = Some(s.p_positive);
        report.p_practically_fair = Some(s.p_practically_fair);
    }
    Ok(Assessment { report, posterior })
}
