//! Split-chain potential scale reduction.

use crate::error::{Error, Result};
use crate::mcmc::CalibrationPosterior;
use crate::stats::{mean, variance};

/// Split R-hat of one scalar parameter. Each chain is cut into two halves
/// (the middle draw is dropped for odd lengths) and chains are trimmed to
/// the shortest. Zero within- and between-chain variance gives 1.0.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    if chains.is_empty() || half < 2 {
        return Err(Error::TooFewChains);
    }
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = &c[..n];
        halves.push(&c[..half]);
        halves.push(&c[n - half..]);
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = mean(&halves.iter().map(|h| variance(h)).collect::<Vec<_>>());
    let between = half as f64 * variance(&means);
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let hf = half as f64;
    let pooled = (hf - 1.0) / hf * within + between / hf;
    Ok((pooled / within).sqrt())
}

/// Split R-hat for every sampled coordinate, keyed by parameter name.
pub fn gelman_rubin(posterior: &CalibrationPosterior) -> Result<Vec<(String, f64)>> {
    let mut columns: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); posterior.chains]; posterior.names.len()];
    for (draw, raw) in posterior.draws.iter().zip(&posterior.raw) {
        for (p, v) in raw.iter().enumerate() {
            columns[p][draw.chain].push(*v);
        }
    }
    posterior
        .names
        .iter()
        .zip(&columns)
        .map(|(name, chains)| {
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            split_rhat(&refs).map(|r| (name.clone(), r))
        })
        .collect()
}
