//! Repeated-split experiments: MAE, CI coverage, prior sensitivity and the
//! non-hierarchical ablation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bc::{bc_delta_samples_multi, BcData};
use crate::beta_binomial::{bb_delta_samples, BetaPrior, DEFAULT_BB_SAMPLES};
use crate::calibration::PriorConfig;
use crate::data::{Dataset, GroupPair, MetricKind};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::freq::freq_metric;
use crate::mcmc::{sample_posterior, SamplerConfig};
use crate::report::summarize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EstimatorKind {
    Freq,
    Bb,
    Bc { prior: PriorConfig },
}

/// A named estimator; names label rows of result tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub name: String,
    pub kind: EstimatorKind,
}

impl Estimator {
    pub fn freq() -> Self {
        Self::new("freq", EstimatorKind::Freq)
    }

    pub fn bb() -> Self {
        Self::new("bb", EstimatorKind::Bb)
    }

    pub fn bc() -> Self {
        Self::bc_with("bc", PriorConfig::default())
    }

    pub fn nhbc() -> Self {
        Self::bc_with("nhbc", PriorConfig::non_hierarchical())
    }

    pub fn llo() -> Self {
        Self::bc_with("llo", PriorConfig::llo())
    }

    pub fn bc_with(name: &str, prior: PriorConfig) -> Self {
        Self::new(name, EstimatorKind::Bc { prior })
    }

    fn new(name: &str, kind: EstimatorKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }

    /// Replaces the prior of a BC-type estimator with `base`, keeping its
    /// family and hierarchy switch.
    pub fn with_base_prior(self, base: &PriorConfig) -> Self {
        match self.kind {
            EstimatorKind::Bc { prior } => Self::bc_with(
                &self.name,
                PriorConfig {
                    family: prior.family,
                    hierarchical: prior.hierarchical,
                    ..*base
                },
            ),
            _ => self,
        }
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "freq" => Ok(Self::freq()),
            "bb" => Ok(Self::bb()),
            "bc" => Ok(Self::bc()),
            "nhbc" => Ok(Self::nhbc()),
            "llo" => Ok(Self::llo()),
            other => Err(format!("unknown method `{other}` (expected freq, bb, bc, nhbc or llo)")),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub seed: u64,
    pub bb_prior: BetaPrior,
    pub bb_samples: usize,
    pub sampler: SamplerConfig,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 0,
            bb_prior: BetaPrior::default(),
            bb_samples: DEFAULT_BB_SAMPLES,
            sampler: SamplerConfig::default(),
            execution: Execution::default(),
        }
    }
}

/// One method's estimate in one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunEstimate {
    pub run: usize,
    pub method: String,
    pub estimate: Option<f64>,
    pub ci_95: Option<(f64, f64)>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    /// Mean absolute error; `None` if any run had no estimate.
    pub mae: Option<f64>,
    /// Standard error of the MAE across runs.
    pub stderr: Option<f64>,
    /// Fraction of runs whose 95% interval contained the truth; `None` for
    /// methods without intervals.
    pub coverage: Option<f64>,
    pub estimable_runs: usize,
    pub flagged_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub metric: MetricKind,
    pub n_labeled: usize,
    pub runs: usize,
    pub truth: f64,
    pub methods: Vec<MethodSummary>,
    pub estimates: Vec<RunEstimate>,
}

impl ExperimentResult {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn mae(&self, name: &str) -> Option<f64> {
        self.method(name).and_then(|m| m.mae)
    }
}

fn summarize_method(name: &str, truth: f64, runs: &[&RunEstimate], has_ci: bool) -> MethodSummary {
    let errors: Vec<f64> = runs.iter().filter_map(|r| r.estimate).map(|e| (e - truth).abs()).collect();
    let complete = errors.len() == runs.len() && !runs.is_empty();
    let (mae, stderr) = if complete {
        (Some(crate::stats::mean(&errors)), Some(crate::stats::std_error(&errors)))
    } else {
        (None, None)
    };
    let coverage = (has_ci && !runs.is_empty()).then(|| {
        let hits = runs
            .iter()
            .filter(|r| r.ci_95.is_some_and(|(lo, hi)| lo <= truth && truth <= hi))
            .count();
        hits as f64 / runs.len() as f64
    });
    MethodSummary {
        method: name.to_string(),
        mae,
        stderr,
        coverage,
        estimable_runs: errors.len(),
        flagged_runs: runs.iter().filter(|r| r.flagged).count(),
    }
}

/// Runs every estimator on `config.runs` random labeled splits of a fully
/// labeled population and scores each metric against the population truth.
///
/// Splits depend only on `(seed, run)`, so all estimators and metrics see
/// the same labeled sets; BC-type estimators share their sampler seed.
pub fn run_experiment(
    population: &Dataset,
    metrics: &[MetricKind],
    pair: GroupPair,
    n_labeled: usize,
    estimators: &[Estimator],
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentResult>> {
    if !population.is_fully_labeled() {
        return Err(Error::NotFullyLabeled {
            unlabeled: population.n_unlabeled(),
        });
    }
    if config.runs == 0 {
        return Err(Error::InvalidSpec("runs must be positive".into()));
    }
    let truths = metrics
        .iter()
        .map(|&m| {
            freq_metric(population, m, pair)
                .delta
                .ok_or_else(|| Error::InvalidSpec(format!("population Δ {m} is undefined")))
        })
        .collect::<Result<Vec<_>>>()?;

    // per run: [estimator][metric]
    let per_run = try_map_indexed(config.execution, config.runs, |run| {
        let r = run as u64;
        let (labeled, unlabeled) = population.split_labeled(n_labeled, derive_seed(config.seed, &[r, 0]))?;
        let mut bc_data = None;
        estimators
            .iter()
            .map(|est| -> Result<Vec<RunEstimate>> {
                let make = |estimate: Option<f64>, ci_95: Option<(f64, f64)>, flagged: bool| RunEstimate {
                    run,
                    method: est.name.clone(),
                    estimate,
                    ci_95,
                    flagged,
                };
                match &est.kind {
                    EstimatorKind::Freq => Ok(metrics
                        .iter()
                        .map(|&m| make(freq_metric(&labeled, m, pair).delta, None, false))
                        .collect()),
                    EstimatorKind::Bb => metrics
                        .iter()
                        .enumerate()
                        .map(|(i, &m)| {
                            let seed = derive_seed(config.seed, &[r, 1, i as u64]);
                            let s = bb_delta_samples(&labeled, m, pair, config.bb_samples, seed, config.bb_prior)?;
                            let sum = summarize(&s.delta, 0.0);
                            Ok(make(sum.map(|s| s.mean), sum.map(|s| s.ci_95), false))
                        })
                        .collect(),
                    EstimatorKind::Bc { prior } => {
                        let sampler = config.sampler.clone().with_seed(derive_seed(config.seed, &[r, 2]));
                        let post = sample_posterior(&labeled, prior, &sampler)?;
                        let data = bc_data.get_or_insert_with(|| BcData::new(&labeled, &unlabeled));
                        let out = bc_delta_samples_multi(data, &post, metrics, pair, sampler.execution)?;
                        Ok(out
                            .into_iter()
                            .map(|b| {
                                let sum = summarize(&b.samples.delta, 0.0);
                                make(sum.map(|s| s.mean), sum.map(|s| s.ci_95), b.flagged)
                            })
                            .collect())
                    }
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(metrics
        .iter()
        .enumerate()
        .map(|(mi, &metric)| {
            let truth = truths[mi];
            let estimates: Vec<RunEstimate> = per_run
                .iter()
                .flat_map(|run| run.iter().map(move |est| est[mi].clone()))
                .collect();
            let methods = estimators
                .iter()
                .map(|est| {
                    let rows: Vec<&RunEstimate> = estimates.iter().filter(|e| e.method == est.name).collect();
                    summarize_method(&est.name, truth, &rows, !matches!(est.kind, EstimatorKind::Freq))
                })
                .collect();
            ExperimentResult {
                metric,
                n_labeled,
                runs: config.runs,
                truth,
                methods,
                estimates,
            }
        })
        .collect())
}

fn single(mut v: Vec<ExperimentResult>) -> ExperimentResult {
    v.remove(0)
}

pub fn mae_experiment(
    population: &Dataset,
    metric: MetricKind,
    pair: GroupPair,
    n_labeled: usize,
    estimators: &[Estimator],
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    run_experiment(population, &[metric], pair, n_labeled, estimators, config).map(single)
}

/// Same protocol as [`mae_experiment`]; callers typically use 1000 runs and
/// read the `coverage` column.
pub fn coverage_experiment(
    population: &Dataset,
    metric: MetricKind,
    pair: GroupPair,
    n_labeled: usize,
    estimators: &[Estimator],
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    mae_experiment(population, metric, pair, n_labeled, estimators, config)
}

pub const DEFAULT_ALPHAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub alpha: f64,
    pub mae: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityTable {
    pub metric: MetricKind,
    pub n_labeled: usize,
    pub runs: usize,
    pub bb_mae: Option<f64>,
    pub bb_stderr: Option<f64>,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "n_L", "method", "alpha", "MAE", "stderr"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (metric, n) = (self.metric.to_string(), self.n_labeled.to_string());
        w.write_record([&metric, &n, "bb", "", &opt(self.bb_mae), &opt(self.bb_stderr)])?;
        for r in &self.rows {
            w.write_record([&metric, &n, "bc", &r.alpha.to_string(), &opt(r.mae), &opt(r.stderr)])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// BC MAE with the prior scales multiplied by each `alpha`, next to BB on
/// the same splits.
pub fn sensitivity_sweep(
    population: &Dataset,
    metric: MetricKind,
    pair: GroupPair,
    n_labeled: usize,
    alphas: &[f64],
    base: &PriorConfig,
    config: &ExperimentConfig,
) -> Result<SensitivityTable> {
    let mut estimators = vec![Estimator::bb()];
    for (i, &alpha) in alphas.iter().enumerate() {
        estimators.push(Estimator::bc_with(&format!("bc#{i}"), base.with_alpha(alpha)));
    }
    let res = mae_experiment(population, metric, pair, n_labeled, &estimators, config)?;
    let bb = &res.methods[0];
    Ok(SensitivityTable {
        metric,
        n_labeled,
        runs: config.runs,
        bb_mae: bb.mae,
        bb_stderr: bb.stderr,
        rows: alphas
            .iter()
            .zip(&res.methods[1..])
            .map(|(&alpha, m)| SensitivityRow {
                alpha,
                mae: m.mae,
                stderr: m.stderr,
            })
            .collect(),
    })
}

/// BB, NHBC and BC on identical splits.
pub fn ablation_nhbc(
    population: &Dataset,
    metric: MetricKind,
    pair: GroupPair,
    n_labeled: usize,
    base: &PriorConfig,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let estimators = [Estimator::bb(), Estimator::nhbc(), Estimator::bc()].map(|e| e.with_base_prior(base));
    mae_experiment(population, metric, pair, n_labeled, &estimators, config)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (metric, n_L, method).
pub fn write_summary_csv<W: Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "metric",
        "n_L",
        "method",
        "runs",
        "truth",
        "MAE",
        "stderr",
        "coverage",
        "estimable_runs",
        "flagged_runs",
    ])?;
    for r in results {
        for m in &r.methods {
            w.write_record([
                r.metric.to_string(),
                r.n_labeled.to_string(),
                m.method.clone(),
                r.runs.to_string(),
                r.truth.to_string(),
                opt(m.mae),
                opt(m.stderr),
                opt(m.coverage),
                m.estimable_runs.to_string(),
                m.flagged_runs.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Long format `n_L, method, MAE, stderr` for external plotting.
pub fn write_plot_csv<W: Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n_L", "method", "MAE", "stderr"])?;
    for r in results {
        for m in &r.methods {
            w.write_record([r.n_labeled.to_string(), m.method.clone(), opt(m.mae), opt(m.stderr)])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Every per-run estimate.
pub fn write_runs_csv<W: Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "n_L", "run", "method", "estimate", "ci_low", "ci_high", "flagged"])?;
    for r in results {
        for e in &r.estimates {
            w.write_record([
                r.metric.to_string(),
                r.n_labeled.to_string(),
                e.run.to_string(),
                e.method.clone(),
                opt(e.estimate),
                opt(e.ci_95.map(|c| c.0)),
                opt(e.ci_95.map(|c| c.1)),
                e.flagged.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
