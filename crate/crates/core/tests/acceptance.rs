//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::beta::ln_beta;

use fairassess::bc::BcData;
use fairassess::beta_binomial::{bb_delta_samples, bb_posterior, BetaPosterior, BetaPrior};
use fairassess::calibration::{calibrate, CalibrationParams, CalibrationTarget, PriorConfig};
use fairassess::freq::metric_counts;
use fairassess::mcmc::{sample_posterior, SamplerConfig};
use fairassess::report::{assess, AssessConfig, Method};
use fairassess::sim::experiment::{coverage_experiment, run_experiment, sensitivity_sweep, Estimator, ExperimentConfig};
use fairassess::sim::error_bound::error_bound_check;
use fairassess::sim::required_n::{required_n_experiment, RequiredNConfig};
use fairassess::sim::suite::{adult_like_spec, in_family_spec, error_bound_configs, miscalibrated_suite, tpr_gap_spec, well_specified_spec};
use fairassess::sim::synthetic::generate;
use fairassess::stats::{ks_critical_1pct, ks_statistic, normal_cdf};
use fairassess::{seeded_rng, Dataset, GroupId, GroupPair, MetricKind, ScoredExample};

/// Population size of the synthetic specs used by the experiment criteria.
const POPULATION: usize = 20_000;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(start: Instant, limit: Duration) -> bool {
    start.elapsed() < limit
}

fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

/// `P(X > Y)` for independent Beta variables by midpoint-rule integration
/// of `f_X(x) F_Y(x)`.
fn grid_prob_greater(x: (f64, f64), y: (f64, f64), n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut cdf_y = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let t = (i as f64 + 0.5) * h;
        let fy = beta_pdf(t, y.0, y.1) * h;
        total += beta_pdf(t, x.0, x.1) * h * (cdf_y + 0.5 * fy);
        cdf_y += fy;
    }
    total
}

fn c1_conjugacy() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(101, 0);
    let mut exact = true;
    for _ in 0..200 {
        let (k, n) = (rng.gen_range(0..30usize), rng.gen_range(0..30usize));
        let ex: Vec<ScoredExample> = (0..k + n)
            .map(|i| ScoredExample::new(0.9, GroupId(0), Some(i < k)))
            .chain([ScoredExample::new(0.9, GroupId(1), Some(true))])
            .collect();
        let d = Dataset::new(vec!["g0".into(), "g1".into()], ex).unwrap();
        let prior = BetaPrior {
            alpha: rng.gen_range(0.1..5.0),
            beta: rng.gen_range(0.1..5.0),
        };
        let post = bb_posterior(&d, MetricKind::Accuracy, GroupId(0), prior).unwrap();
        exact &= post
            == BetaPosterior {
                alpha: prior.alpha + k as f64,
                beta: prior.beta + n as f64,
            };
    }
    // 3 of 4 correct versus 1 of 4 correct under a uniform prior
    let mut ex = Vec::new();
    for i in 0..4 {
        ex.push(ScoredExample::new(0.9, GroupId(1), Some(i < 3)));
        ex.push(ScoredExample::new(0.9, GroupId(0), Some(i < 1)));
    }
    let d = Dataset::new(vec!["g0".into(), "g1".into()], ex).unwrap();
    let pair = GroupPair::new(GroupId(1), GroupId(0)).unwrap();
    let s = bb_delta_samples(&d, MetricKind::Accuracy, pair, 1_000_000, 7, BetaPrior::default()).unwrap();
    let sampled = s.delta.iter().filter(|v| **v > 0.0).count() as f64 / s.delta.len() as f64;
    let grid = grid_prob_greater((4.0, 2.0), (2.0, 4.0), 200_000);
    let err = (sampled - grid).abs();
    let pass = exact && err < 0.005 && within(start, Duration::from_secs(10));
    outcome(
        pass,
        format!(
            "posterior exact on 200 random counts: {exact}; P(Δ>0) Beta(4,2) vs Beta(2,4): sampled {sampled:.5}, grid {grid:.5}, |diff| {err:.5} (tol 0.005)"
        ),
    )
}

fn random_gradient_config(seed: u64) -> (CalibrationTarget, Vec<f64>) {
    let mut rng = seeded_rng(seed, 0);
    let groups = rng.gen_range(1..=3usize);
    let mut ex = Vec::new();
    for g in 0..groups {
        for _ in 0..rng.gen_range(5..40) {
            let label = if rng.gen_bool(0.8) { Some(rng.gen_bool(0.5)) } else { None };
            ex.push(ScoredExample::new(rng.gen_range(0.01..0.99), GroupId(g), label));
        }
    }
    let names = (0..groups).map(|g| format!("g{g}")).collect();
    let data = Dataset::new(names, ex).unwrap();
    let mut prior = if seed.is_multiple_of(2) { PriorConfig::default() } else { PriorConfig::llo() };
    prior.alpha = rng.gen_range(0.3..3.0);
    if seed % 5 == 4 {
        prior.hierarchical = false;
    }
    let target = CalibrationTarget::new(&data.labeled(), prior).unwrap();
    let x = (0..target.dim())
        .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (target, x)
}

fn c2_identity_and_gradient() -> Outcome {
    let start = Instant::now();
    let identity_err = (0..10_000)
        .map(|i| {
            let s = (i as f64 + 0.5) / 10_000.0;
            (calibrate(s, &CalibrationParams::IDENTITY) - s).abs()
        })
        .fold(0.0, f64::max);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (target, x) = random_gradient_config(seed);
        let grad = target.gradient(&x);
        for j in 0..x.len() {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (target.log_density(&up) - target.log_density(&down)) / (2.0 * h);
            worst = worst.max((grad[j] - fd).abs() / grad[j].abs().max(1.0));
        }
    }
    let pass = identity_err <= 1e-12 && worst < 1e-4 && within(start, Duration::from_secs(10));
    outcome(
        pass,
        format!("max |f(s; identity) - s| = {identity_err:.1e}; worst relative gradient error over 20 configs {worst:.2e} (tol 1e-4)"),
    )
}

/// CDF of `Normal(mu, sigma)` marginalized over `mu ~ N(0, mu_scale)` and
/// `sigma ~ HalfNormal(sigma_scale)`.
fn hierarchical_cdf(t: f64, mu_scale: f64, sigma_scale: f64) -> f64 {
    let nodes = 2000;
    let top = 9.0;
    let du = top / nodes as f64;
    let mut total = 0.0;
    for i in 0..nodes {
        let u = (i as f64 + 0.5) * du;
        let weight = 2.0 * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt() * du;
        let sigma = sigma_scale * u;
        total += weight * normal_cdf(t / (sigma * sigma + mu_scale * mu_scale).sqrt());
    }
    total
}

fn c3_prior_recovery() -> Outcome {
    let start = Instant::now();
    let data = Dataset::new(vec!["g".into()], vec![ScoredExample::new(0.5, GroupId(0), None)]).unwrap();
    let prior = PriorConfig::default();
    let s = prior.effective_scales();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 9];
    for rep in 0..20 {
        let cfg = SamplerConfig {
            prior_only: true,
            seed: 1000 + rep,
            ..SamplerConfig::default()
        };
        let post = match sample_posterior(&data.labeled(), &prior, &cfg) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("sampler failed: {e}")),
        };
        for d in &post.draws {
            let p = d.groups[0];
            let h = d.hyper;
            for (c, v) in cols
                .iter_mut()
                .zip([p.a, p.b, p.c, h.mu_a, h.mu_b, h.mu_c, h.sigma_a, h.sigma_b, h.sigma_c])
            {
                c.push(v);
            }
        }
    }
    let half_normal = |x: f64, scale: f64| if x <= 0.0 { 0.0 } else { 2.0 * normal_cdf(x / scale) - 1.0 };
    let log_or_neg = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    let cdfs: [Box<dyn Fn(f64) -> f64>; 9] = [
        Box::new(|x| hierarchical_cdf(log_or_neg(x), s.mu_a, s.sigma_a)),
        Box::new(|x| hierarchical_cdf(log_or_neg(x), s.mu_b, s.sigma_b)),
        Box::new(|x| hierarchical_cdf(x, s.mu_c, s.sigma_c)),
        Box::new(|x| normal_cdf(x / s.mu_a)),
        Box::new(|x| normal_cdf(x / s.mu_b)),
        Box::new(|x| normal_cdf(x / s.mu_c)),
        Box::new(|x| half_normal(x, s.sigma_a)),
        Box::new(|x| half_normal(x, s.sigma_b)),
        Box::new(|x| half_normal(x, s.sigma_c)),
    ];
    let names = ["a", "b", "c", "mu_a", "mu_b", "mu_c", "sigma_a", "sigma_b", "sigma_c"];
    let n = cols[0].len();
    let crit = ks_critical_1pct(n, None);
    let stats: Vec<f64> = cols.iter().zip(&cdfs).map(|(c, f)| ks_statistic(c, f)).collect();
    let worst = stats.iter().cloned().fold(0.0, f64::max);
    let worst_name = names[stats.iter().position(|v| *v == worst).unwrap()];
    let pass = worst < crit && within(start, Duration::from_secs(120));
    outcome(
        pass,
        format!("{n} pooled draws from 20 runs; max KS {worst:.4} ({worst_name}) vs 1% critical {crit:.4}"),
    )
}

fn c4_parameter_recovery() -> Outcome {
    let start = Instant::now();
    let truth = CalibrationParams::new(1.5, 0.8, 0.4).unwrap();
    let mut rng = seeded_rng(44, 0);
    let ex = (0..5000)
        .map(|_| {
            let s: f64 = rng.gen_range(0.005..0.995);
            let y = rng.gen_bool(calibrate(s, &truth));
            ScoredExample::new(s, GroupId(0), Some(y))
        })
        .collect();
    let data = Dataset::new(vec!["g".into()], ex).unwrap();
    let cfg = SamplerConfig {
        seed: 4,
        ..SamplerConfig::default()
    };
    let post = match sample_posterior(&data, &PriorConfig::default(), &cfg) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("sampler failed: {e}")),
    };
    let n = post.len() as f64;
    let mean = |f: fn(&CalibrationParams) -> f64| post.draws.iter().map(|d| f(&d.groups[0])).sum::<f64>() / n;
    let est = [mean(|p| p.a), mean(|p| p.b), mean(|p| p.c)];
    let errs = [est[0] - truth.a, est[1] - truth.b, est[2] - truth.c];
    let max_rhat = post.diagnostics.max_rhat().unwrap_or(f64::INFINITY);
    let pass = errs.iter().all(|e| e.abs() < 0.1) && max_rhat < 1.1 && within(start, Duration::from_secs(120));
    outcome(
        pass,
        format!(
            "posterior means a {:.3} b {:.3} c {:.3} (truth 1.5, 0.8, 0.4; tol 0.1); max R-hat {max_rhat:.3} (tol 1.1)",
            est[0], est[1], est[2]
        ),
    )
}

fn c5_labeled_only() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(55, 0);
    let cfg = SamplerConfig {
        chains: 2,
        burn_in: 100,
        samples_per_chain: 25,
        ..SamplerConfig::default()
    };
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    for i in 0..100 {
        let mut ex = Vec::new();
        for g in 0..2 {
            for _ in 0..rng.gen_range(1..15) {
                ex.push(ScoredExample::new(rng.gen_range(0.0..1.0), GroupId(g), Some(rng.gen_bool(0.5))));
            }
        }
        let data = Dataset::new(vec!["g0".into(), "g1".into()], ex).unwrap();
        let post = match sample_posterior(&data, &PriorConfig::default(), &cfg.clone().with_seed(i)) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("sampler failed: {e}")),
        };
        let bc = BcData::new(&data, &data.unlabeled());
        for g in [GroupId(0), GroupId(1)] {
            for m in MetricKind::ALL {
                let freq = metric_counts(&data, m, g).rate();
                for d in &post.draws {
                    let theta = bc.theta(g, m, &d.groups[g.0]).ok();
                    compared += 1;
                    if theta != freq {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let pass = mismatches == 0 && within(start, Duration::from_secs(60));
    outcome(pass, format!("{compared} per-draw comparisons over 100 datasets, {mismatches} mismatches"))
}

fn c6_required_n() -> Outcome {
    let start = Instant::now();
    let spec = tpr_gap_spec(1_000, 6);
    let pair = spec.pair("majority", "minority").unwrap();
    let cfg = RequiredNConfig {
        sims: 1000,
        n_grid: vec![48_000, 96_000],
        seed: 6,
        ..RequiredNConfig::default()
    };
    let r = match required_n_experiment(&spec, pair, &cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let (h48, h96) = (r.hit_fraction(48_000).unwrap(), r.hit_fraction(96_000).unwrap());
    let pass = h96 >= 0.95 - 0.02 && h48 < 0.95 + 0.02 && within(start, Duration::from_secs(300));
    outcome(
        pass,
        format!("hit fraction in [0.04, 0.06]: {h48:.3} at 48k (need < 0.95 ± 0.02), {h96:.3} at 96k (need >= 0.95 ± 0.02)"),
    )
}

fn c7_mae_dominance() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        runs: 100,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let methods = [Estimator::bb(), Estimator::bc()];
    let suite = miscalibrated_suite(POPULATION, 70);
    let mut cells = 0;
    let mut wins = 0;
    let mut strong = 0;
    let mut losses = Vec::new();
    let mut ratios = Vec::new();
    for named in &suite {
        let pop = generate(&named.spec).unwrap();
        let pair = named.pair().unwrap();
        let plan = [
            (vec![MetricKind::Accuracy], [10, 100]),
            (vec![MetricKind::Tpr, MetricKind::Fpr], [40, 200]),
        ];
        for (metrics, sizes) in plan {
            for n in sizes {
                let results = match run_experiment(&pop.dataset, &metrics, pair, n, &methods, &cfg) {
                    Ok(r) => r,
                    Err(e) => return outcome(false, format!("{}: experiment failed: {e}", named.name)),
                };
                for r in results {
                    let (bb, bc) = (r.mae("bb").unwrap_or(f64::NAN), r.mae("bc").unwrap_or(f64::NAN));
                    cells += 1;
                    if bc < bb {
                        wins += 1;
                    } else {
                        losses.push(format!("{} {} n={n}: bc {bc:.4} bb {bb:.4}", named.name, r.metric));
                    }
                    if r.metric == MetricKind::Accuracy && n == 10 {
                        ratios.push(format!("{} {:.2}", named.name, bc / bb));
                        strong += (bc < 0.4 * bb) as usize;
                    }
                }
            }
        }
    }
    let pass = wins == cells && 2 * strong >= suite.len() && within(start, Duration::from_secs(1800));
    let mut detail = format!(
        "BC < BB in {wins}/{cells} cells; BC/BB at n_L=10 accuracy: {} ({strong}/{} below 0.4)",
        ratios.join(", "),
        suite.len()
    );
    if !losses.is_empty() {
        detail.push_str(&format!("; losses: {}", losses.join("; ")));
    }
    outcome(pass, detail)
}

fn c8_coverage() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        runs: 1000,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let well = well_specified_spec(POPULATION, 80);
    let pop = generate(&well.spec).unwrap();
    let bb = coverage_experiment(&pop.dataset, MetricKind::Accuracy, well.pair().unwrap(), 100, &[Estimator::bb()], &cfg);
    let fam = in_family_spec(POPULATION, 81);
    let pop = generate(&fam.spec).unwrap();
    let bc = coverage_experiment(&pop.dataset, MetricKind::Accuracy, fam.pair().unwrap(), 10, &[Estimator::bc()], &cfg);
    let (bb, bc) = match (bb, bc) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("experiment failed: {e}")),
    };
    let cov_bb = bb.method("bb").and_then(|m| m.coverage).unwrap_or(0.0);
    let cov_bc = bc.method("bc").and_then(|m| m.coverage).unwrap_or(0.0);
    let pass = (0.90..=0.99).contains(&cov_bb) && cov_bc >= 0.90 && within(start, Duration::from_secs(1800));
    outcome(
        pass,
        format!("BB coverage {cov_bb:.3} on well-specified data, n_L=100 (need [0.90, 0.99]); BC coverage {cov_bc:.3} in family, n_L=10 (need >= 0.90); 1000 runs each"),
    )
}

fn c9_error_bound() -> Outcome {
    let start = Instant::now();
    let mut held = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    let configs = error_bound_configs(POPULATION, 90);
    for (i, named) in configs.iter().enumerate() {
        let pop = generate(&named.spec).unwrap();
        let check = match error_bound_check(
            &pop,
            named.pair().unwrap(),
            100,
            &PriorConfig::default(),
            &SamplerConfig::default(),
            900 + i as u64,
        ) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("{}: {e}", named.name)),
        };
        worst = worst.min(check.bound - check.error);
        if check.holds {
            held += 1;
        } else {
            failures.push(format!("{} error {:.4} > bound {:.4}", named.name, check.error, check.bound));
        }
    }
    let pass = held == configs.len() && within(start, Duration::from_secs(600));
    let mut detail = format!("bound held in {held}/{} configurations; smallest slack {worst:.4}", configs.len());
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    outcome(pass, detail)
}

fn c10_sensitivity() -> Outcome {
    let start = Instant::now();
    let named = adult_like_spec(POPULATION, 100);
    let pop = generate(&named.spec).unwrap();
    let cfg = ExperimentConfig {
        runs: 100,
        seed: 10,
        ..ExperimentConfig::default()
    };
    let alphas = [0.1, 0.5, 1.0, 2.0, 10.0];
    let mut rows = Vec::new();
    let mut ok = true;
    for n in [10, 100] {
        let t = match sensitivity_sweep(
            &pop.dataset,
            MetricKind::Accuracy,
            named.pair().unwrap(),
            n,
            &alphas,
            &PriorConfig::default(),
            &cfg,
        ) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("sweep failed: {e}")),
        };
        let bb = t.bb_mae.unwrap_or(f64::NAN);
        let cells: Vec<String> = t
            .rows
            .iter()
            .map(|r| {
                let bc = r.mae.unwrap_or(f64::NAN);
                ok &= bc < bb;
                format!("α={} {bc:.4}", r.alpha)
            })
            .collect();
        rows.push(format!("n_L={n}: BB {bb:.4}, BC {}", cells.join(", ")));
    }
    let pass = ok && within(start, Duration::from_secs(1800));
    outcome(pass, rows.join("; "))
}

fn c11_performance() -> Outcome {
    let named = adult_like_spec(10_100, 110);
    let pop = generate(&named.spec).unwrap();
    let (lab, unl) = pop.dataset.split_labeled(100, 11).unwrap();
    let mut ex = lab.examples().to_vec();
    ex.extend_from_slice(unl.examples());
    let data = Dataset::new(pop.dataset.groups().to_vec(), ex).unwrap();
    let pair = named.pair().unwrap();
    let start = Instant::now();
    let r = assess(&data, MetricKind::Accuracy, pair, Method::Bc, &AssessConfig::default());
    let secs = start.elapsed().as_secs_f64();
    match r {
        Ok(a) => outcome(
            secs < 30.0 && a.report.t == 800,
            format!(
                "BC assess with n_L={}, n_U={}, T={} took {secs:.2}s (limit 30s)",
                a.report.n_l, a.report.n_u, a.report.t
            ),
        ),
        Err(e) => outcome(false, format!("assess failed: {e}")),
    }
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fairassess"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{:?} failed: {}", args.first(), String::from_utf8_lossy(&out.stderr)))
    }
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let config = p("config.toml");
    std::fs::write(
        &config,
        "seed = 12\n[sampler]\nburn_in = 300\nsamples_per_chain = 50\n[bb]\nsamples = 200\n",
    )
    .unwrap();
    let data = p("data.csv");
    if let Err(e) = run_cli(&["simulate", "--preset", "adult_like", "--population", "3000", "--labeled", "150", "--seed", "3", "-o", &data]) {
        return outcome(false, e);
    }
    let cfg = config.as_str();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["simulate", "--preset", "piecewise", "--population", "2000", "--labeled", "100", "--seed", "3"]),
        ("assess", vec!["assess", "--metric", "tpr", "--method", "bc", "--pair", "nonwhite,white", "--epsilon", "0.02", "--seed", "5", "--config", cfg, &data]),
        ("mae-experiment", vec!["mae-experiment", "--config", cfg, "--preset", "compas_like", "--population", "2000", "--n-labeled", "10,40", "--runs", "3", "--metrics", "accuracy,fpr", "--methods", "freq,bb,bc,nhbc,llo"]),
        ("coverage-experiment", vec!["coverage-experiment", "--config", cfg, "--preset", "in_family", "--population", "2000", "--n-labeled", "10", "--runs", "4", "--methods", "bb,bc"]),
        ("required-n", vec!["required-n", "--config", cfg, "--sims", "50", "--n-grid", "1000,20000"]),
        ("sensitivity", vec!["sensitivity", "--config", cfg, "--population", "2000", "--n-labeled", "10", "--runs", "3", "--alphas", "0.5,1"]),
        ("ablation", vec!["ablation", "--config", cfg, "--population", "2000", "--n-labeled", "10", "--runs", "3"]),
    ]
    .into_iter()
    .map(|(n, v)| (n, v.into_iter().map(String::from).collect()))
    .collect();

    let mut identical = Vec::new();
    let mut differing = Vec::new();
    for (name, base) in &commands {
        let mut files = Vec::new();
        for run in 0..2 {
            let mut args = base.clone();
            let out = p(&format!("{name}-{run}.csv"));
            let json = p(&format!("{name}-{run}.json"));
            args.extend(["-o".into(), out.clone(), "--json".into(), json.clone()]);
            let mut produced = vec![out, json];
            if name.ends_with("experiment") || *name == "ablation" {
                let plot = p(&format!("{name}-{run}.plot.csv"));
                let runs = p(&format!("{name}-{run}.runs.csv"));
                args.extend(["--plot".into(), plot.clone(), "--runs-csv".into(), runs.clone()]);
                produced.extend([plot, runs]);
            }
            if *name == "assess" {
                let draws = p(&format!("{name}-{run}.draws.csv"));
                args.extend(["--draws".into(), draws.clone()]);
                produced.push(draws);
            }
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            if let Err(e) = run_cli(&refs) {
                return outcome(false, e);
            }
            files.push(produced);
        }
        let same = files[0].iter().zip(&files[1]).all(|(a, b)| {
            let (a, b) = (std::fs::read(Path::new(a)), std::fs::read(Path::new(b)));
            matches!((a, b), (Ok(a), Ok(b)) if a == b && !a.is_empty())
        });
        if same {
            identical.push(*name);
        } else {
            differing.push(*name);
        }
    }
    let pass = differing.is_empty();
    outcome(
        pass,
        format!(
            "{}/{} subcommands byte-identical across two runs{}",
            identical.len(),
            commands.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("conjugacy oracle", c1_conjugacy),
        ("calibration identity and gradient", c2_identity_and_gradient),
        ("MCMC prior recovery", c3_prior_recovery),
        ("MCMC parameter recovery", c4_parameter_recovery),
        ("labeled-only reduction", c5_labeled_only),
        ("required-n reproduction", c6_required_n),
        ("MAE dominance", c7_mae_dominance),
        ("coverage sanity", c8_coverage),
        ("error bound", c9_error_bound),
        ("sensitivity robustness", c10_sensitivity),
        ("assess performance", c11_performance),
        ("CLI determinism", c12_determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        ran += 1;
        failed += !o.pass as usize;
        println!(
            "criterion {id:>2} [{}] {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
