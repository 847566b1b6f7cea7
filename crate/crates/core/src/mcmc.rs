//! Multi-chain adaptive Metropolis-within-Gibbs sampler for the hierarchical
//! calibration posterior.
//!
//! One sweep updates, in order:
//! - each group's block with a random-walk Gaussian proposal whose
//!   covariance and scale adapt during burn-in (groups without labeled data
//!   are drawn exactly from their normal conditional instead);
//! - each `(mu, ln sigma)` hyperparameter pair: `ln sigma` by random-walk
//!   Metropolis on its density with `mu` integrated out, then `mu` from its
//!   exact normal conditional.
//!
//! Adaptation stops at the end of burn-in, so collected draws come from a
//! fixed kernel.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate, half_normal_logpdf, normal_logpdf, CalibrationParams, CalibrationTarget, HyperParams, PriorConfig,
};
use crate::data::Dataset;
use crate::diagnostics::gelman_rubin;
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub samples_per_chain: usize,
    pub seed: u64,
    /// Acceptance rate the burn-in adaptation steers toward.
    pub target_accept: f64,
    /// Iterations between adaptation updates.
    pub adapt_window: usize,
    /// Metropolis updates of each `ln sigma` per sweep.
    pub hyper_steps: usize,
    /// Metropolis updates of each labeled group block per sweep.
    pub group_steps: usize,
    /// Allow sampling with no labeled data (the prior).
    pub prior_only: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            burn_in: 1500,
            samples_per_chain: 200,
            seed: 0,
            target_accept: 0.3,
            adapt_window: 50,
            hyper_steps: 5,
            group_steps: 4,
            prior_only: false,
            execution: Execution::default(),
        }
    }
}

impl SamplerConfig {
    pub fn total_draws(&self) -> usize {
        self.chains * self.samples_per_chain
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSampler(m.to_string()));
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        if self.samples_per_chain == 0 {
            return bad("samples_per_chain must be at least 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        if self.adapt_window == 0 || self.hyper_steps == 0 || self.group_steps == 0 {
            return bad("adapt_window, hyper_steps and group_steps must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorDraw {
    pub chain: usize,
    pub iteration: usize,
    pub groups: Vec<CalibrationParams>,
    pub hyper: HyperParams,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockAcceptance {
    pub chain: usize,
    pub block: String,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Split R-hat per sampled coordinate; empty when chains are too short.
    pub rhat: Vec<(String, f64)>,
    pub acceptance: Vec<BlockAcceptance>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.rhat.iter().map(|(_, r)| *r).reduce(f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationPosterior {
    /// Names of the sampled (unconstrained) coordinates.
    pub names: Vec<String>,
    pub draws: Vec<PosteriorDraw>,
    /// Unconstrained state of each draw, aligned with `draws`.
    pub raw: Vec<Vec<f64>>,
    pub chains: usize,
    pub samples_per_chain: usize,
    pub diagnostics: Diagnostics,
}

impl CalibrationPosterior {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Posterior-mean calibration curve of group `g` at score `s`.
    pub fn mean_curve(&self, g: usize, s: f64) -> f64 {
        self.draws.iter().map(|d| calibrate(s, &d.groups[g])).sum::<f64>() / self.len() as f64
    }

    pub fn write_draws_csv<W: Write>(&self, writer: W, group_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        for name in group_names {
            for p in ["a", "b", "c"] {
                header.push(format!("{p}[{name}]"));
            }
        }
        header.extend(
            ["mu_a", "mu_b", "mu_c", "sigma_a", "sigma_b", "sigma_c"].map(String::from),
        );
        w.write_record(&header)?;
        for d in &self.draws {
            let mut row = vec![d.chain.to_string(), d.iteration.to_string()];
            for p in &d.groups {
                row.extend([p.a, p.b, p.c].map(|v| v.to_string()));
            }
            let h = &d.hyper;
            row.extend(
                [h.mu_a, h.mu_b, h.mu_c, h.sigma_a, h.sigma_b, h.sigma_c].map(|v| v.to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn sample_posterior(
    labeled: &Dataset,
    prior: &PriorConfig,
    config: &SamplerConfig,
) -> Result<CalibrationPosterior> {
    config.validate()?;
    if labeled.n_labeled() == 0 && !config.prior_only {
        return Err(Error::NoLabeledData);
    }
    let target = CalibrationTarget::new(labeled, *prior)?;
    let outputs = try_map_indexed(config.execution, config.chains, |c| {
        run_chain(&target, config, c)
    })?;

    let mut acceptance = Vec::new();
    let mut draws = Vec::with_capacity(config.total_draws());
    let mut raw = Vec::with_capacity(config.total_draws());
    for (c, out) in outputs.into_iter().enumerate() {
        for (block, rate, adaptive) in out.acceptance {
            if adaptive && rate < 0.01 {
                return Err(Error::DivergedChain { chain: c, block, rate });
            }
            acceptance.push(BlockAcceptance { chain: c, block, rate });
        }
        for (i, x) in out.states.into_iter().enumerate() {
            let (groups, hyper) = target.layout.unpack(&x);
            draws.push(PosteriorDraw {
                chain: c,
                iteration: config.burn_in + i,
                groups,
                hyper,
            });
            raw.push(x);
        }
    }
    let mut posterior = CalibrationPosterior {
        names: target.layout.names(),
        draws,
        raw,
        chains: config.chains,
        samples_per_chain: config.samples_per_chain,
        diagnostics: Diagnostics::default(),
    };
    posterior.diagnostics = Diagnostics {
        rhat: gelman_rubin(&posterior).unwrap_or_default(),
        acceptance,
    };
    Ok(posterior)
}

struct ChainOutput {
    states: Vec<Vec<f64>>,
    /// (block name, post-burn-in acceptance rate, adaptive Metropolis block)
    acceptance: Vec<(String, f64, bool)>,
}

/// Adaptive random-walk state for one block.
struct Proposal {
    dim: usize,
    log_scale: f64,
    /// Row-major lower-triangular factor of the proposal covariance shape.
    chol: Vec<f64>,
    history: Vec<f64>,
    window_accepted: usize,
    window_proposed: usize,
    windows: usize,
    accepted: usize,
    proposed: usize,
}

impl Proposal {
    fn new(dim: usize, initial_sd: f64) -> Self {
        let mut chol = vec![0.0; dim * dim];
        for i in 0..dim {
            chol[i * dim + i] = initial_sd;
        }
        Self {
            dim,
            log_scale: 0.0,
            chol,
            history: Vec::new(),
            window_accepted: 0,
            window_proposed: 0,
            windows: 0,
            accepted: 0,
            proposed: 0,
        }
    }

    fn propose(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let scale = self.log_scale.exp();
        (0..self.dim)
            .map(|i| {
                let step: f64 = (0..=i).map(|j| self.chol[i * self.dim + j] * z[j]).sum();
                x[i] + scale * step
            })
            .collect()
    }

    fn record(&mut self, accepted: bool, adapting: bool) {
        if adapting {
            self.window_accepted += accepted as usize;
            self.window_proposed += 1;
        } else {
            self.accepted += accepted as usize;
            self.proposed += 1;
        }
    }

    fn adapt(&mut self, target: f64, learn_shape: bool) {
        if self.window_proposed > 0 {
            let rate = self.window_accepted as f64 / self.window_proposed as f64;
            self.windows += 1;
            self.log_scale += (rate - target) / (self.windows as f64).sqrt();
        }
        self.window_accepted = 0;
        self.window_proposed = 0;
        let rows = self.history.len() / self.dim;
        if learn_shape && rows >= 20.max(10 * self.dim) {
            let recent = &self.history[(rows / 2) * self.dim..];
            if let Some(chol) = covariance_cholesky(recent, self.dim) {
                self.chol = chol;
            }
        }
    }

    fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Cholesky factor of `2.38^2 / d * cov(rows)`, with a small ridge.
fn covariance_cholesky(rows: &[f64], dim: usize) -> Option<Vec<f64>> {
    let n = rows.len() / dim;
    let mut mean = vec![0.0; dim];
    for r in rows.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let factor = 2.38 * 2.38 / dim as f64;
    let mut cov = vec![0.0; dim * dim];
    for r in rows.chunks_exact(dim) {
        for i in 0..dim {
            for j in 0..=i {
                cov[i * dim + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            cov[i * dim + j] *= factor / (n - 1) as f64;
        }
        cov[i * dim + i] += 1e-10;
    }
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * dim + k] * l[j * dim + k]).sum();
            if i == j {
                let d = cov[i * dim + i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i * dim + i] = d.sqrt();
            } else {
                l[i * dim + j] = (cov[i * dim + j] - s) / l[j * dim + j];
            }
        }
    }
    Some(l)
}

fn metropolis_accept(rng: &mut ChaCha8Rng, log_ratio: f64) -> bool {
    log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio
}

fn run_chain(target: &CalibrationTarget, config: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = seeded_rng(config.seed, chain as u64 + 1);
    let layout = &target.layout;
    let prior = target.prior();
    let d = layout.group_dim();
    let groups = layout.groups;
    let pairs = layout.hyper_pairs();

    // Dispersed start around the identity calibration.
    let mut x = vec![0.0; layout.len()];
    for (i, &k) in prior.components().iter().enumerate().take(pairs) {
        let (_, sigma_scale) = prior.component_scales(k);
        let o = layout.hyper_offset(i);
        x[o] = 0.1 * rng.sample::<f64, _>(StandardNormal);
        x[o + 1] = (0.8 * sigma_scale).ln() + 0.2 * rng.sample::<f64, _>(StandardNormal);
    }
    for v in x.iter_mut().take(groups * d) {
        *v = 0.3 * rng.sample::<f64, _>(StandardNormal);
    }

    let nan = |iteration: usize| Error::NonFiniteDensity { chain, iteration };
    let mut loglik: Vec<f64> = (0..groups)
        .map(|g| target.labels[g].log_likelihood(&layout.group_params(&x[g * d..(g + 1) * d])))
        .collect();
    if loglik.iter().any(|l| l.is_nan()) {
        return Err(nan(0));
    }

    let mut group_props: Vec<Proposal> = (0..groups).map(|_| Proposal::new(d, 0.1)).collect();
    let mut hyper_props: Vec<Proposal> = (0..pairs).map(|_| Proposal::new(1, 0.5)).collect();
    let mut scaled_props: Vec<Proposal> = (0..groups).map(|_| Proposal::new(d, 0.5)).collect();
    let mut shift_props: Vec<Proposal> = (0..pairs).map(|_| Proposal::new(2, 0.2)).collect();
    let total = config.burn_in + config.samples_per_chain;
    let mut states = Vec::with_capacity(config.samples_per_chain);
    // unlabeled groups are integrated out of the hyperparameter update and
    // redrawn from their conditional afterwards
    let labeled_groups: Vec<usize> = (0..groups).filter(|&g| !target.labels[g].is_empty()).collect();
    let mut values = vec![0.0; labeled_groups.len()];

    for it in 0..total {
        let adapting = it < config.burn_in;

        let hyper = target.component_hyper(&x);
        for g in 0..groups {
            let o = g * d;
            if target.labels[g].is_empty() {
                for (j, &(mu, sigma)) in hyper.iter().enumerate() {
                    x[o + j] = mu + sigma * rng.sample::<f64, _>(StandardNormal);
                }
                continue;
            }
            for _ in 0..config.group_steps {
                let current = &x[o..o + d];
                let proposal = group_props[g].propose(current, &mut rng);
                let ll = target.labels[g].log_likelihood(&layout.group_params(&proposal));
                let log_ratio = ll + block_prior(&proposal, &hyper) - loglik[g] - block_prior(current, &hyper);
                // overflowing proposals land where the density vanishes
                let accepted = !log_ratio.is_nan() && metropolis_accept(&mut rng, log_ratio);
                if accepted {
                    x[o..o + d].copy_from_slice(&proposal);
                    loglik[g] = ll;
                }
                let prop = &mut group_props[g];
                prop.record(accepted, adapting);
                if adapting {
                    prop.history.extend_from_slice(&x[o..o + d]);
                }

                // the same block in standardized coordinates, so step sizes
                // follow the current group spread
                let z: Vec<f64> = hyper
                    .iter()
                    .enumerate()
                    .map(|(j, &(mu, sigma))| (x[o + j] - mu) / sigma)
                    .collect();
                let z_new = scaled_props[g].propose(&z, &mut rng);
                let proposal: Vec<f64> = hyper
                    .iter()
                    .zip(&z_new)
                    .map(|(&(mu, sigma), zj)| mu + sigma * zj)
                    .collect();
                let ll = target.labels[g].log_likelihood(&layout.group_params(&proposal));
                let std_normal = |v: &[f64]| -0.5 * v.iter().map(|t| t * t).sum::<f64>();
                let log_ratio = ll + std_normal(&z_new) - loglik[g] - std_normal(&z);
                let accepted = !log_ratio.is_nan() && metropolis_accept(&mut rng, log_ratio);
                if accepted {
                    x[o..o + d].copy_from_slice(&proposal);
                    loglik[g] = ll;
                }
                let prop = &mut scaled_props[g];
                prop.record(accepted, adapting);
                if adapting {
                    prop.history.extend_from_slice(if accepted { &z_new } else { &z });
                }
            }
        }

        for (k, prop) in hyper_props.iter_mut().enumerate() {
            for (v, &g) in values.iter_mut().zip(&labeled_groups) {
                *v = x[g * d + k];
            }
            let o = layout.hyper_offset(k);
            let (mut lp, mut mean, mut sd) = target.collapsed_hyper(k, &values, x[o + 1]);
            for _ in 0..config.hyper_steps {
                let candidate = prop.propose(&x[o + 1..o + 2], &mut rng)[0];
                let (lp_new, mean_new, sd_new) = target.collapsed_hyper(k, &values, candidate);
                let accepted = !lp_new.is_nan() && metropolis_accept(&mut rng, lp_new - lp);
                if accepted {
                    x[o + 1] = candidate;
                    (lp, mean, sd) = (lp_new, mean_new, sd_new);
                }
                prop.record(accepted, adapting);
            }
            x[o] = mean + sd * rng.sample::<f64, _>(StandardNormal);
            let sigma = x[o + 1].exp();
            for g in (0..groups).filter(|g| target.labels[*g].is_empty()) {
                x[g * d + k] = x[o] + sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }

        // Non-centered move: shift and rescale component k of every group
        // together with (mu_k, ln sigma_k), keeping standardized offsets.
        for (k, prop) in shift_props.iter_mut().enumerate() {
            let o = layout.hyper_offset(k);
            let (mu, log_sigma) = (x[o], x[o + 1]);
            let candidate = prop.propose(&x[o..o + 2], &mut rng);
            let (mu_new, log_sigma_new) = (candidate[0], candidate[1]);
            let ratio = (log_sigma_new - log_sigma).exp();
            let mut moved = x.clone();
            let mut ll_new = loglik.clone();
            let mut log_ratio = 0.0;
            for g in 0..groups {
                let i = g * d + k;
                moved[i] = mu_new + ratio * (x[i] - mu);
                if !target.labels[g].is_empty() {
                    ll_new[g] = target.labels[g].log_likelihood(&layout.group_params(&moved[g * d..(g + 1) * d]));
                    log_ratio += ll_new[g] - loglik[g];
                }
            }
            let (mu_scale, sigma_scale) = prior.component_scales(prior.components()[k]);
            let hyper_lp = |m: f64, ls: f64| normal_logpdf(m, 0.0, mu_scale) + half_normal_logpdf(ls.exp(), sigma_scale) + ls;
            log_ratio += hyper_lp(mu_new, log_sigma_new) - hyper_lp(mu, log_sigma);
            // overflowing proposals land where the density vanishes
            let accepted = !log_ratio.is_nan() && metropolis_accept(&mut rng, log_ratio);
            if accepted {
                moved[o] = mu_new;
                moved[o + 1] = log_sigma_new;
                x = moved;
                loglik = ll_new;
            }
            prop.record(accepted, adapting);
            if adapting {
                prop.history.extend_from_slice(&x[o..o + 2]);
            }
        }

        if adapting && (it + 1) % config.adapt_window == 0 {
            let learn_shape = it < config.burn_in * 3 / 4;
            for p in group_props.iter_mut().chain(&mut scaled_props) {
                p.adapt(config.target_accept, learn_shape);
            }
            for p in &mut hyper_props {
                p.adapt(config.target_accept, false);
            }
            for p in &mut shift_props {
                p.adapt(config.target_accept, learn_shape);
            }
        }
        if !adapting {
            states.push(x.clone());
        }
    }

    let mut acceptance = Vec::with_capacity(groups + pairs);
    for (g, (p, q)) in group_props.iter().zip(&scaled_props).enumerate() {
        let adaptive = !target.labels[g].is_empty();
        let rate = if p.proposed + q.proposed == 0 {
            1.0
        } else {
            (p.accepted + q.accepted) as f64 / (p.proposed + q.proposed) as f64
        };
        acceptance.push((format!("group[{g}]"), rate, adaptive));
    }
    for (k, p) in hyper_props.iter().enumerate() {
        let name = prior.components()[k].name();
        acceptance.push((format!("log_sigma_{name}"), p.acceptance(), true));
    }
    for (k, p) in shift_props.iter().enumerate() {
        let name = prior.components()[k].name();
        acceptance.push((format!("shift_{name}"), p.acceptance(), false));
    }
    Ok(ChainOutput { states, acceptance })
}

/// Single-chain adaptive random-walk Metropolis on an arbitrary density,
/// using the same proposal adaptation as the calibration sampler. Returns
/// the post-burn-in states.
pub fn adaptive_random_walk<F>(log_density: F, initial: &[f64], config: &SamplerConfig) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let mut rng = seeded_rng(config.seed, 1);
    let mut x = initial.to_vec();
    let mut lp = log_density(&x);
    let mut prop = Proposal::new(x.len(), 0.5);
    let mut out = Vec::with_capacity(config.samples_per_chain);
    for it in 0..config.burn_in + config.samples_per_chain {
        let adapting = it < config.burn_in;
        let candidate = prop.propose(&x, &mut rng);
        let lp_new = log_density(&candidate);
        if lp_new.is_nan() {
            return Err(Error::NonFiniteDensity { chain: 0, iteration: it });
        }
        let accepted = metropolis_accept(&mut rng, lp_new - lp);
        if accepted {
            x = candidate;
            lp = lp_new;
        }
        prop.record(accepted, adapting);
        if adapting {
            prop.history.extend_from_slice(&x);
            if (it + 1) % config.adapt_window == 0 {
                prop.adapt(config.target_accept, it < config.burn_in * 3 / 4);
            }
        } else {
            out.push(x.clone());
        }
    }
    Ok(out)
}

fn block_prior(block: &[f64], hyper: &[(f64, f64)]) -> f64 {
    block
        .iter()
        .zip(hyper)
        .map(|(v, &(mu, sigma))| crate::calibration::normal_logpdf(*v, mu, sigma))
        .sum()
}
