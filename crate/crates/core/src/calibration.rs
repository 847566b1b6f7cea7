//! Beta calibration maps and the hierarchical calibration posterior density.
//!
//! A group's calibration map is
//! `f(s; a, b, c) = 1 / (1 + exp(-c - a ln s + b ln(1 - s)))`, with
//! `ln a_g ~ N(mu_a, sigma_a)`, `ln b_g ~ N(mu_b, sigma_b)`, `c_g ~ N(mu_c, sigma_c)`,
//! normal priors on the `mu`s and half-normal priors on the `sigma`s. All
//! scales are standard deviations.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CalibrationParams {
    pub const IDENTITY: CalibrationParams = CalibrationParams {
        a: 1.0,
        b: 1.0,
        c: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() && c.is_finite() {
            Ok(Self { a, b, c })
        } else {
            Err(Error::InvalidPrior(format!(
                "calibration needs a, b > 0 and finite c, got ({a}, {b}, {c})"
            )))
        }
    }

    #[inline]
    pub fn log_odds(&self, log_s: f64, log_1ms: f64) -> f64 {
        self.c + self.a * log_s - self.b * log_1ms
    }
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn calibrate(s: f64, params: &CalibrationParams) -> f64 {
    sigmoid(params.log_odds(s.ln(), (-s).ln_1p()))
}

/// Calibrated probability that the hard prediction at score `s` is correct.
pub fn latent_accuracy(s: f64, params: &CalibrationParams) -> f64 {
    let f = calibrate(s, params);
    if s >= 0.5 {
        f
    } else {
        1.0 - f
    }
}

/// Projects onto the linear-log-odds sub-family by tying `b` to `a`.
pub fn llo_constrain(params: CalibrationParams) -> CalibrationParams {
    CalibrationParams {
        b: params.a,
        ..params
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationFamily {
    #[default]
    Beta,
    Llo,
}

/// Base prior scales, multiplied by `PriorConfig::alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorScales {
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_c: f64,
}

impl Default for PriorScales {
    fn default() -> Self {
        Self {
            mu_a: 0.4,
            mu_b: 0.4,
            mu_c: 2.0,
            sigma_a: 0.15,
            sigma_b: 0.15,
            sigma_c: 0.75,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub family: CalibrationFamily,
    /// Multiplier applied to every base scale.
    pub alpha: f64,
    pub scales: PriorScales,
    /// When false the hyperparameters are frozen at their prior means and
    /// the hyperprior terms are dropped.
    pub hierarchical: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            family: CalibrationFamily::Beta,
            alpha: 1.0,
            scales: PriorScales::default(),
            hierarchical: true,
        }
    }
}

impl PriorConfig {
    pub fn llo() -> Self {
        Self {
            family: CalibrationFamily::Llo,
            ..Self::default()
        }
    }

    pub fn non_hierarchical() -> Self {
        Self {
            hierarchical: false,
            ..Self::default()
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scales;
        let all = [self.alpha, s.mu_a, s.mu_b, s.mu_c, s.sigma_a, s.sigma_b, s.sigma_c];
        if all.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidPrior(format!(
                "alpha and all prior scales must be positive: {self:?}"
            )))
        }
    }

    /// Scales after applying `alpha`.
    pub fn effective_scales(&self) -> PriorScales {
        let s = &self.scales;
        PriorScales {
            mu_a: s.mu_a * self.alpha,
            mu_b: s.mu_b * self.alpha,
            mu_c: s.mu_c * self.alpha,
            sigma_a: s.sigma_a * self.alpha,
            sigma_b: s.sigma_b * self.alpha,
            sigma_c: s.sigma_c * self.alpha,
        }
    }

    /// Prior means of the hyperparameters: zero locations and half-normal
    /// means `scale * sqrt(2 / pi)`.
    pub fn frozen_hyper(&self) -> HyperParams {
        let s = self.effective_scales();
        let k = (2.0 / std::f64::consts::PI).sqrt();
        HyperParams {
            mu_a: 0.0,
            mu_b: 0.0,
            mu_c: 0.0,
            sigma_a: s.sigma_a * k,
            sigma_b: s.sigma_b * k,
            sigma_c: s.sigma_c * k,
        }
    }

    pub fn components(&self) -> &'static [Component] {
        match self.family {
            CalibrationFamily::Beta => &[Component::A, Component::B, Component::C],
            CalibrationFamily::Llo => &[Component::A, Component::C],
        }
    }

    /// (location scale, spread scale) of a component's hyperprior.
    pub fn component_scales(&self, k: Component) -> (f64, f64) {
        let s = self.effective_scales();
        match k {
            Component::A => (s.mu_a, s.sigma_a),
            Component::B => (s.mu_b, s.sigma_b),
            Component::C => (s.mu_c, s.sigma_c),
        }
    }
}

/// One coordinate of a group's calibration triple on its sampling scale
/// (`ln a`, `ln b`, `c`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    A,
    B,
    C,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::A => "a",
            Component::B => "b",
            Component::C => "c",
        }
    }

    fn hyper(self, h: &HyperParams) -> (f64, f64) {
        match self {
            Component::A => (h.mu_a, h.sigma_a),
            Component::B => (h.mu_b, h.sigma_b),
            Component::C => (h.mu_c, h.sigma_c),
        }
    }

    fn set_hyper(self, h: &mut HyperParams, mu: f64, sigma: f64) {
        match self {
            Component::A => (h.mu_a, h.sigma_a) = (mu, sigma),
            Component::B => (h.mu_b, h.sigma_b) = (mu, sigma),
            Component::C => (h.mu_c, h.sigma_c) = (mu, sigma),
        }
    }

    fn value(self, p: &CalibrationParams) -> f64 {
        match self {
            Component::A => p.a.ln(),
            Component::B => p.b.ln(),
            Component::C => p.c,
        }
    }
}

#[inline]
pub fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * LN_2PI - sigma.ln() - 0.5 * z * z
}

/// Normal(0, scale) truncated to (0, inf).
#[inline]
pub fn half_normal_logpdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = x / scale;
    std::f64::consts::LN_2 - 0.5 * LN_2PI - scale.ln() - 0.5 * z * z
}

/// Bernoulli log-likelihood of a label given the calibrated log-odds.
#[inline]
fn bernoulli_logit(y: f64, eta: f64) -> f64 {
    y * eta - softplus(eta)
}

fn effective_params(family: CalibrationFamily, p: &CalibrationParams) -> CalibrationParams {
    match family {
        CalibrationFamily::Beta => *p,
        CalibrationFamily::Llo => llo_constrain(*p),
    }
}

/// Log joint density of labels, group parameters and (when hierarchical)
/// hyperparameters, on the natural parameter scale.
///
/// `params` is indexed by group id and must cover every group in `labeled`.
pub fn log_joint(
    labeled: &Dataset,
    params: &[CalibrationParams],
    hyper: &HyperParams,
    prior: &PriorConfig,
) -> f64 {
    let mut lp = 0.0;
    for ex in labeled.examples() {
        let Some(y) = ex.label else { continue };
        let p = effective_params(prior.family, &params[ex.group.0]);
        let eta = p.log_odds(ex.score.ln(), (-ex.score).ln_1p());
        lp += bernoulli_logit(y as u8 as f64, eta);
    }
    for p in params {
        for &k in prior.components() {
            let (mu, sigma) = k.hyper(hyper);
            lp += normal_logpdf(k.value(p), mu, sigma);
        }
    }
    if prior.hierarchical {
        for &k in prior.components() {
            let (mu, sigma) = k.hyper(hyper);
            let (mu_scale, sigma_scale) = prior.component_scales(k);
            lp += normal_logpdf(mu, 0.0, mu_scale) + half_normal_logpdf(sigma, sigma_scale);
        }
    }
    lp
}

/// Layout of the unconstrained sampling vector: one block per group
/// (`[ln a, ln b, c]`, or `[ln a, c]` for LLO) followed, when hierarchical,
/// by one `(mu, ln sigma)` pair per component.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    pub groups: usize,
    pub prior: PriorConfig,
}

impl ParamLayout {
    pub fn new(groups: usize, prior: PriorConfig) -> Self {
        Self { groups, prior }
    }

    pub fn group_dim(&self) -> usize {
        self.prior.components().len()
    }

    pub fn group_offset(&self, g: usize) -> usize {
        g * self.group_dim()
    }

    pub fn hyper_pairs(&self) -> usize {
        if self.prior.hierarchical {
            self.prior.components().len()
        } else {
            0
        }
    }

    pub fn hyper_offset(&self, k: usize) -> usize {
        self.groups * self.group_dim() + 2 * k
    }

    pub fn len(&self) -> usize {
        self.groups * self.group_dim() + 2 * self.hyper_pairs()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        for g in 0..self.groups {
            for k in self.prior.components() {
                names.push(match k {
                    Component::C => format!("c[{g}]"),
                    _ => format!("log_{}[{g}]", k.name()),
                });
            }
        }
        for k in self.prior.components().iter().take(self.hyper_pairs()) {
            names.push(format!("mu_{}", k.name()));
            names.push(format!("log_sigma_{}", k.name()));
        }
        names
    }

    pub fn group_params(&self, block: &[f64]) -> CalibrationParams {
        match self.prior.family {
            CalibrationFamily::Beta => CalibrationParams {
                a: block[0].exp(),
                b: block[1].exp(),
                c: block[2],
            },
            CalibrationFamily::Llo => {
                let a = block[0].exp();
                CalibrationParams { a, b: a, c: block[1] }
            }
        }
    }

    pub fn hyper(&self, x: &[f64]) -> HyperParams {
        if !self.prior.hierarchical {
            return self.prior.frozen_hyper();
        }
        let mut h = self.prior.frozen_hyper();
        for (i, &k) in self.prior.components().iter().enumerate() {
            let o = self.hyper_offset(i);
            k.set_hyper(&mut h, x[o], x[o + 1].exp());
        }
        if self.prior.family == CalibrationFamily::Llo {
            // b is tied to a in the LLO family
            h.mu_b = h.mu_a;
            h.sigma_b = h.sigma_a;
        }
        h
    }

    pub fn unpack(&self, x: &[f64]) -> (Vec<CalibrationParams>, HyperParams) {
        let d = self.group_dim();
        let params = (0..self.groups)
            .map(|g| self.group_params(&x[g * d..(g + 1) * d]))
            .collect();
        (params, self.hyper(x))
    }

    pub fn pack(&self, params: &[CalibrationParams], hyper: &HyperParams) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for p in params {
            x.extend(self.prior.components().iter().map(|k| k.value(p)));
        }
        for &k in self.prior.components().iter().take(self.hyper_pairs()) {
            let (mu, sigma) = k.hyper(hyper);
            x.push(mu);
            x.push(sigma.ln());
        }
        x
    }
}

/// Labeled examples of one group, preprocessed for repeated likelihood
/// evaluation.
#[derive(Clone, Debug, Default)]
pub struct GroupLabels {
    pub log_s: Vec<f64>,
    pub log_1ms: Vec<f64>,
    pub y: Vec<f64>,
}

impl GroupLabels {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn log_likelihood(&self, p: &CalibrationParams) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.y.len() {
            ll += bernoulli_logit(self.y[i], p.log_odds(self.log_s[i], self.log_1ms[i]));
        }
        ll
    }
}

/// The posterior density on the unconstrained sampling vector, including
/// the `ln sigma` Jacobian.
#[derive(Clone, Debug)]
pub struct CalibrationTarget {
    pub layout: ParamLayout,
    pub labels: Vec<GroupLabels>,
}

impl CalibrationTarget {
    pub fn new(labeled: &Dataset, prior: PriorConfig) -> Result<Self> {
        prior.validate()?;
        let mut labels = vec![GroupLabels::default(); labeled.num_groups()];
        for ex in labeled.examples() {
            let Some(y) = ex.label else { continue };
            let l = &mut labels[ex.group.0];
            l.log_s.push(ex.score.ln());
            l.log_1ms.push((-ex.score).ln_1p());
            l.y.push(y as u8 as f64);
        }
        Ok(Self {
            layout: ParamLayout::new(labeled.num_groups(), prior),
            labels,
        })
    }

    pub fn prior(&self) -> &PriorConfig {
        &self.layout.prior
    }

    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    /// `(mu, sigma)` per component for the current state.
    pub fn component_hyper(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let h = self.layout.hyper(x);
        self.prior().components().iter().map(|k| k.hyper(&h)).collect()
    }

    /// Log density of one group's block given the hyperparameters.
    pub fn group_conditional(&self, g: usize, block: &[f64], hyper: &[(f64, f64)]) -> f64 {
        let mut lp = self.labels[g].log_likelihood(&self.layout.group_params(block));
        for (v, &(mu, sigma)) in block.iter().zip(hyper) {
            lp += normal_logpdf(*v, mu, sigma);
        }
        lp
    }

    /// Log density of `ln sigma` for component `k` with its `mu`
    /// integrated out, given the group values of that component. Returns
    /// the log density and the conditional mean and sd of `mu`.
    pub fn collapsed_hyper(&self, k: usize, values: &[f64], log_sigma: f64) -> (f64, f64, f64) {
        let comp = self.prior().components()[k];
        let (mu_scale, sigma_scale) = self.prior().component_scales(comp);
        let sigma = log_sigma.exp();
        let var = sigma * sigma;
        let n = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let sum_sq: f64 = values.iter().map(|v| v * v).sum();
        let precision = n / var + 1.0 / (mu_scale * mu_scale);
        let mean = (sum / var) / precision;
        let lp = -n * log_sigma - 0.5 * sum_sq / var - 0.5 * precision.ln()
            + 0.5 * precision * mean * mean
            + half_normal_logpdf(sigma, sigma_scale)
            + log_sigma;
        (lp, mean, precision.sqrt().recip())
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.layout.group_dim();
        let hyper = self.component_hyper(x);
        let mut lp = 0.0;
        for g in 0..self.layout.groups {
            lp += self.group_conditional(g, &x[g * d..(g + 1) * d], &hyper);
        }
        for (i, &k) in self.prior().components().iter().enumerate().take(self.layout.hyper_pairs()) {
            let o = self.layout.hyper_offset(i);
            let (mu_scale, sigma_scale) = self.prior().component_scales(k);
            lp += normal_logpdf(x[o], 0.0, mu_scale)
                + half_normal_logpdf(x[o + 1].exp(), sigma_scale)
                + x[o + 1];
        }
        lp
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.layout.group_dim();
        let family = self.prior().family;
        let hyper = self.component_hyper(x);
        let mut grad = vec![0.0; x.len()];
        for g in 0..self.layout.groups {
            let o = g * d;
            let block = &x[o..o + d];
            let p = self.layout.group_params(block);
            let lab = &self.labels[g];
            let (mut da, mut db, mut dc) = (0.0, 0.0, 0.0);
            for i in 0..lab.len() {
                let eta = p.log_odds(lab.log_s[i], lab.log_1ms[i]);
                let r = lab.y[i] - sigmoid(eta);
                match family {
                    CalibrationFamily::Beta => {
                        da += r * p.a * lab.log_s[i];
                        db -= r * p.b * lab.log_1ms[i];
                    }
                    CalibrationFamily::Llo => da += r * p.a * (lab.log_s[i] - lab.log_1ms[i]),
                }
                dc += r;
            }
            let lik = match family {
                CalibrationFamily::Beta => vec![da, db, dc],
                CalibrationFamily::Llo => vec![da, dc],
            };
            for j in 0..d {
                let (mu, sigma) = hyper[j];
                grad[o + j] = lik[j] - (block[j] - mu) / (sigma * sigma);
            }
        }
        for (i, &k) in self.prior().components().iter().enumerate().take(self.layout.hyper_pairs()) {
            let o = self.layout.hyper_offset(i);
            let (mu, log_sigma) = (x[o], x[o + 1]);
            let var = (2.0 * log_sigma).exp();
            let (mu_scale, sigma_scale) = self.prior().component_scales(k);
            let mut dmu = -mu / (mu_scale * mu_scale);
            let mut dls = 1.0 - var / (sigma_scale * sigma_scale);
            for g in 0..self.layout.groups {
                let r = x[g * d + i] - mu;
                dmu += r / var;
                dls += -1.0 + r * r / var;
            }
            grad[o] = dmu;
            grad[o + 1] = dls;
        }
        grad
    }
}
