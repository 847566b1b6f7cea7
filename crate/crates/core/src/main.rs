use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fairassess::config::FileConfig;
use fairassess::data::{ingest_csv, CsvSchema};
use fairassess::exec::Execution;
use fairassess::report::{assess, Method};
use fairassess::sim::experiment::{
    ablation_nhbc, run_experiment, sensitivity_sweep, write_plot_csv, write_runs_csv, write_summary_csv,
    ExperimentConfig, ExperimentResult,
};
use fairassess::sim::required_n::required_n_experiment;
use fairassess::sim::suite::NamedSpec;
use fairassess::sim::synthetic::generate;
use fairassess::{Dataset, MetricKind};

/// Estimate group-fairness gaps of a classifier from few labels.
#[derive(Parser, Debug)]
#[command(name = "fairassess", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scored dataset.
    Simulate(SimulateArgs),
    /// Estimate a fairness gap on a scored dataset.
    Assess(AssessArgs),
    /// Mean absolute error of each method over repeated labeled splits.
    MaeExperiment(ExperimentArgs),
    /// Coverage of 95% intervals over repeated labeled splits.
    CoverageExperiment(ExperimentArgs),
    /// Hit fraction of the frequentist gap inside a target interval per n_L.
    RequiredN(RequiredNArgs),
    /// BC error as the prior scales are multiplied by each alpha.
    Sensitivity(ExperimentArgs),
    /// BB, non-hierarchical BC and BC on identical splits.
    Ablation(ExperimentArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> Result<FileConfig> {
        let mut cfg = match &self.config {
            Some(path) => FileConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => FileConfig::default(),
        };
        if self.sequential {
            cfg.sampler.execution = Execution::Sequential;
            cfg.required_n.execution = Execution::Sequential;
        }
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args, Debug)]
struct Outputs {
    /// CSV output; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the result as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Bundled spec; overrides the config file's spec.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    population: Option<usize>,
    /// Keep labels on this many random rows and leave the rest empty.
    #[arg(long)]
    labeled: Option<usize>,
    #[command(flatten)]
    out: Outputs,
}

#[derive(Args, Debug)]
struct AssessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "accuracy")]
    metric: MetricKind,
    #[arg(long, default_value = "bc")]
    method: Method,
    /// Unprivileged and privileged group, comma separated.
    #[arg(long, value_name = "G1,G0")]
    pair: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "score")]
    score_column: String,
    #[arg(long, default_value = "group")]
    group_column: String,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Dump the calibration posterior draws (BC only) as CSV.
    #[arg(long)]
    draws: Option<PathBuf>,
    #[command(flatten)]
    out: Outputs,
    /// Scored CSV; rows with an empty label are unlabeled.
    data: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<MetricKind>,
    #[arg(long, value_delimiter = ',')]
    n_labeled: Vec<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Methods among freq, bb, bc, nhbc, llo.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Prior-scale multipliers for `sensitivity`.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[command(flatten)]
    out: Outputs,
    /// Long-format `n_L, method, MAE, stderr` CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Every per-run estimate as CSV.
    #[arg(long)]
    runs_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RequiredNArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    sims: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    #[command(flatten)]
    out: Outputs,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    if let Some(p) = path {
        let mut w = sink(Some(p))?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn spec_from(cfg: &mut FileConfig, preset: &Option<String>, population: Option<usize>, seed: u64) -> Result<NamedSpec> {
    if let Some(p) = preset {
        cfg.preset = Some(p.clone());
        cfg.synthetic = None;
    }
    if population.is_some() {
        cfg.experiment.population = population;
    }
    if cfg.preset.is_none() && cfg.synthetic.is_none() {
        cfg.preset = Some("adult_like".into());
    }
    Ok(cfg.named_spec(seed)?)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    let seed = cfg.seed_or(args.common.seed);
    let named = spec_from(&mut cfg, &args.preset, args.population, seed)?;
    let pop = generate(&named.spec)?;
    let data = match args.labeled {
        Some(n) => {
            let (lab, unl) = pop.dataset.split_labeled(n, seed)?;
            let mut ex = lab.examples().to_vec();
            ex.extend_from_slice(unl.examples());
            Dataset::new(pop.dataset.groups().to_vec(), ex)?
        }
        None => pop.dataset,
    };
    let mut w = sink(args.out.output.as_deref())?;
    data.write_csv(&mut w)?;
    w.flush()?;
    write_json(args.out.json.as_deref(), &named)
}

fn run_assess(args: AssessArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    cfg.sampler.execution = args.common.execution();
    let seed = cfg.seed_or(args.common.seed);
    let schema = CsvSchema {
        score: args.score_column,
        group: args.group_column,
        label: args.label_column,
        ..CsvSchema::default()
    };
    let data = ingest_csv(&args.data, &schema).with_context(|| format!("reading {}", args.data.display()))?;
    let pair = match args.pair.as_deref().map(|p| p.split_once(',')) {
        Some(Some((u, p))) => data.pair(u.trim(), p.trim())?,
        Some(None) => bail!("--pair expects two comma-separated group names"),
        None if data.num_groups() == 2 => data.pair(&data.groups()[1], &data.groups()[0])?,
        None => bail!("--pair G1,G0 is required when the data has more than two groups"),
    };
    let config = cfg.assess_config(seed, args.epsilon);
    let result = assess(&data, args.metric, pair, args.method, &config)?;
    if let (Some(path), Some(post)) = (&args.draws, &result.posterior) {
        let mut w = sink(Some(path))?;
        post.write_draws_csv(&mut w, data.groups())?;
        w.flush()?;
    }
    match (&args.out.output, &args.out.json) {
        (None, None) => {
            let mut w = sink(None)?;
            serde_json::to_writer_pretty(&mut w, &result.report)?;
            writeln!(w)?;
            w.flush()?;
        }
        (out, json) => {
            if out.is_some() {
                let mut w = sink(out.as_deref())?;
                result.report.write_csv(&mut w)?;
                w.flush()?;
            }
            write_json(json.as_deref(), &result.report)?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Mae,
    Coverage,
    Sensitivity,
    Ablation,
}

fn experiment(args: ExperimentArgs, kind: Kind) -> Result<()> {
    let mut cfg = args.common.load()?;
    let seed = cfg.seed_or(args.common.seed);
    if let Some(r) = args.runs {
        cfg.experiment.runs = Some(r);
    }
    if !args.metrics.is_empty() {
        cfg.experiment.metrics = args.metrics.clone();
    }
    if !args.n_labeled.is_empty() {
        cfg.experiment.n_labeled = args.n_labeled.clone();
    }
    if !args.methods.is_empty() {
        cfg.experiment.methods = args.methods.clone();
    }
    if !args.alphas.is_empty() {
        cfg.experiment.alphas = args.alphas.clone();
    }
    cfg.sampler.execution = Execution::Sequential;
    let named = spec_from(&mut cfg, &args.preset, args.population, seed)?;
    let pop = generate(&named.spec)?;
    let pair = named.pair()?;
    let default_runs = if kind == Kind::Coverage { 1000 } else { 100 };
    let ex_cfg = ExperimentConfig {
        execution: args.common.execution(),
        ..cfg.experiment_config(seed, default_runs)
    };
    let metrics = &cfg.experiment.metrics;

    if kind == Kind::Sensitivity {
        let mut tables = Vec::new();
        for &metric in metrics {
            for &n in &cfg.experiment.n_labeled {
                tables.push(sensitivity_sweep(
                    &pop.dataset,
                    metric,
                    pair,
                    n,
                    &cfg.experiment.alphas,
                    &cfg.prior,
                    &ex_cfg,
                )?);
            }
        }
        let mut w = sink(args.out.output.as_deref())?;
        let mut first = true;
        for t in &tables {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            let text = String::from_utf8(buf)?;
            let body = if first { &text[..] } else { text.split_once('\n').map_or("", |x| x.1) };
            w.write_all(body.as_bytes())?;
            first = false;
        }
        w.flush()?;
        return write_json(args.out.json.as_deref(), &tables);
    }

    let mut results: Vec<ExperimentResult> = Vec::new();
    for &n in &cfg.experiment.n_labeled {
        if kind == Kind::Ablation {
            for &metric in metrics {
                results.push(ablation_nhbc(&pop.dataset, metric, pair, n, &cfg.prior, &ex_cfg)?);
            }
        } else {
            let estimators = cfg.estimators()?;
            results.extend(run_experiment(&pop.dataset, metrics, pair, n, &estimators, &ex_cfg)?);
        }
    }
    let mut w = sink(args.out.output.as_deref())?;
    write_summary_csv(&results, &mut w)?;
    w.flush()?;
    if let Some(p) = &args.plot {
        let mut w = sink(Some(p))?;
        write_plot_csv(&results, &mut w)?;
        w.flush()?;
    }
    if let Some(p) = &args.runs_csv {
        let mut w = sink(Some(p))?;
        write_runs_csv(&results, &mut w)?;
        w.flush()?;
    }
    write_json(args.out.json.as_deref(), &results)
}

fn required_n(args: RequiredNArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    let seed = cfg.seed_or(args.common.seed);
    if args.preset.is_none() && cfg.preset.is_none() && cfg.synthetic.is_none() {
        cfg.preset = Some("tpr_gap".into());
    }
    let named = spec_from(&mut cfg, &args.preset, None, seed)?;
    let mut rn = cfg.required_n.clone();
    rn.seed = seed;
    rn.execution = args.common.execution();
    if let Some(s) = args.sims {
        rn.sims = s;
    }
    if !args.n_grid.is_empty() {
        rn.n_grid = args.n_grid.clone();
    }
    let result = required_n_experiment(&named.spec, named.pair()?, &rn)?;
    let mut w = sink(args.out.output.as_deref())?;
    result.write_csv(&mut w)?;
    w.flush()?;
    write_json(args.out.json.as_deref(), &result)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Assess(a) => run_assess(a),
        Command::MaeExperiment(a) => experiment(a, Kind::Mae),
        Command::CoverageExperiment(a) => experiment(a, Kind::Coverage),
        Command::RequiredN(a) => required_n(a),
        Command::Sensitivity(a) => experiment(a, Kind::Sensitivity),
        Command::Ablation(a) => experiment(a, Kind::Ablation),
    }
}
