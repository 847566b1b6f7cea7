//! TOML configuration files shared by the CLI subcommands.
//!
//! Every section is optional and falls back to the library defaults:
//!
//! ```toml
//! seed = 7
//! epsilon = 0.02
//! preset = "adult_like"        # or a [synthetic] table
//!
//! [prior]
//! family = "beta"              # or "llo"
//! alpha = 1.0
//! hierarchical = true
//!
//! [sampler]
//! chains = 4
//! burn_in = 1500
//! samples_per_chain = 200
//!
//! [bb]
//! samples = 800
//! prior = { alpha = 1.0, beta = 1.0 }
//!
//! [experiment]
//! runs = 100
//! n_labeled = [10, 100]
//! metrics = ["accuracy"]
//! methods = ["freq", "bb", "bc"]
//! alphas = [0.1, 0.5, 1.0, 2.0, 10.0]
//! population = 100000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beta_binomial::{BetaPrior, DEFAULT_BB_SAMPLES};
use crate::calibration::PriorConfig;
use crate::data::MetricKind;
use crate::error::{Error, Result};
use crate::mcmc::SamplerConfig;
use crate::report::{AssessConfig, DEFAULT_EPSILON};
use crate::sim::experiment::{Estimator, ExperimentConfig, DEFAULT_ALPHAS};
use crate::sim::required_n::RequiredNConfig;
use crate::sim::suite::{preset, NamedSpec};
use crate::sim::synthetic::SyntheticSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BbSection {
    pub prior: BetaPrior,
    pub samples: usize,
}

impl Default for BbSection {
    fn default() -> Self {
        Self {
            prior: BetaPrior::default(),
            samples: DEFAULT_BB_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Defaults to 100, or 1000 for coverage experiments.
    pub runs: Option<usize>,
    pub n_labeled: Vec<usize>,
    pub metrics: Vec<MetricKind>,
    pub methods: Vec<String>,
    pub alphas: Vec<f64>,
    /// Overrides the population size of the synthetic spec.
    pub population: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            runs: None,
            n_labeled: vec![10, 20, 40, 100, 200],
            metrics: vec![MetricKind::Accuracy],
            methods: vec!["freq".into(), "bb".into(), "bc".into()],
            alphas: DEFAULT_ALPHAS.to_vec(),
            population: None,
        }
    }
}

/// A synthetic spec given inline, with the pair to compare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSection {
    #[serde(flatten)]
    pub spec: SyntheticSpec,
    /// `[unprivileged, privileged]`; defaults to the second and first group.
    pub pair: Option<(String, String)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub preset: Option<String>,
    pub synthetic: Option<SyntheticSection>,
    pub prior: PriorConfig,
    pub sampler: SamplerConfig,
    pub bb: BbSection,
    pub experiment: ExperimentSection,
    pub required_n: RequiredNConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.sampler.validate()?;
        self.bb.prior.validate()?;
        if self.preset.is_some() && self.synthetic.is_some() {
            return Err(Error::Config("give either `preset` or `[synthetic]`, not both".into()));
        }
        for m in &self.experiment.methods {
            m.parse::<Estimator>().map_err(Error::Config)?;
        }
        Ok(())
    }

    /// Seed from the command line, else the file, else 0.
    pub fn seed_or(&self, cli: Option<u64>) -> u64 {
        cli.or(self.seed).unwrap_or(0)
    }

    pub fn assess_config(&self, seed: u64, epsilon: Option<f64>) -> AssessConfig {
        AssessConfig {
            epsilon: epsilon.or(self.epsilon).unwrap_or(DEFAULT_EPSILON),
            seed,
            bb_prior: self.bb.prior,
            bb_samples: self.bb.samples,
            prior: self.prior,
            sampler: self.sampler.clone(),
        }
    }

    pub fn experiment_config(&self, seed: u64, default_runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            runs: self.experiment.runs.unwrap_or(default_runs),
            seed,
            bb_prior: self.bb.prior,
            bb_samples: self.bb.samples,
            sampler: self.sampler.clone(),
            ..ExperimentConfig::default()
        }
    }

    /// Estimators named in `[experiment].methods`, using this file's prior
    /// as the base for the BC variants.
    pub fn estimators(&self) -> Result<Vec<Estimator>> {
        self.experiment
            .methods
            .iter()
            .map(|m| {
                m.parse::<Estimator>()
                    .map(|e| e.with_base_prior(&self.prior))
                    .map_err(Error::Config)
            })
            .collect()
    }

    /// The synthetic spec selected by `preset` or `[synthetic]`, with the
    /// population override applied.
    pub fn named_spec(&self, seed: u64) -> Result<NamedSpec> {
        let population = self.experiment.population.unwrap_or(100_000);
        let mut named = match (&self.preset, &self.synthetic) {
            (Some(name), None) => preset(name, population, seed)
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?,
            (None, Some(s)) => {
                let (u, p) = s
                    .pair
                    .clone()
                    .or_else(|| {
                        let g = &s.spec.groups;
                        (g.len() >= 2).then(|| (g[1].name.clone(), g[0].name.clone()))
                    })
                    .ok_or_else(|| Error::InvalidSpec("at least two groups are required".into()))?;
                let mut spec = s.spec.clone();
                if let Some(n) = self.experiment.population {
                    spec.population = n;
                }
                NamedSpec {
                    name: "custom".into(),
                    spec,
                    unprivileged: u,
                    privileged: p,
                }
            }
            (None, None) => return Err(Error::Config("no synthetic spec: set `preset` or `[synthetic]`".into())),
            (Some(_), Some(_)) => unreachable!("rejected by validate"),
        };
        if self.synthetic.is_none() {
            named.spec.seed = seed;
        }
        named.spec.validate()?;
        Ok(named)
    }
}
