use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unknown group label `{0}`")]
    UnknownGroupLabel(String),
    #[error("declared group `{0}` has no examples")]
    MissingGroup(String),
    #[error("dataset has no examples")]
    EmptyDataset,
    #[error("requested {requested} labeled examples but the dataset has {available}")]
    NTooLarge { requested: usize, available: usize },
    #[error("operation requires a fully labeled dataset ({unlabeled} rows lack a label)")]
    NotFullyLabeled { unlabeled: usize },
    #[error("group pair must name two distinct groups")]
    InvalidPair,
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidSampler(String),
    #[error("log density evaluated to NaN in chain {chain} at iteration {iteration}")]
    NonFiniteDensity { chain: usize, iteration: usize },
    #[error("chain {chain} diverged: block `{block}` accepted {rate:.4} of proposals after adaptation")]
    DivergedChain { chain: usize, block: String, rate: f64 },
    #[error("R-hat needs at least two split half-chains")]
    TooFewChains,
    #[error("group {0} has no labeled or unlabeled examples")]
    EmptyGroup(usize),
    #[error("metric denominator vanished for group {0}")]
    DegenerateDenominator(usize),
    #[error("no labeled examples; request prior-only sampling explicitly")]
    NoLabeledData,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
