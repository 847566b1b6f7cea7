//! Synthetic populations with a known true calibration per group.
//!
//! Per group, labels are Bernoulli(positive_rate) and the honest probability
//! `p = P(y = 1 | x)` is drawn from the class-conditional Beta of an
//! honestly calibrated Beta(κπ, κ(1 − π)) score:
//! `p | y=1 ~ Beta(κπ + 1, κ(1 − π))`, `p | y=0 ~ Beta(κπ, κ(1 − π) + 1)`.
//! The model reports `s = f*⁻¹(p)`, where `f*` is the group's true
//! calibration map, so recalibrating reported scores with `f*` recovers `p`.

use rand::Rng;
use rand_distr::{Beta, Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::calibration::{calibrate, softplus, CalibrationParams};
use crate::data::{Dataset, GroupId, GroupPair, MetricKind, ScoredExample};
use crate::error::{Error, Result};
use crate::freq::freq_metric;
use crate::seeded_rng;

/// Map from a reported score to the honest probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrueCalibration {
    Beta { a: f64, b: f64, c: f64 },
    /// Piecewise-linear through (0, 0), the given `(reported, honest)`
    /// knots, and (1, 1).
    Piecewise { knots: Vec<(f64, f64)> },
}

impl TrueCalibration {
    pub const IDENTITY: TrueCalibration = TrueCalibration::Beta {
        a: 1.0,
        b: 1.0,
        c: 0.0,
    };

    pub fn beta(a: f64, b: f64, c: f64) -> Self {
        TrueCalibration::Beta { a, b, c }
    }

    pub fn params(&self) -> Option<CalibrationParams> {
        match *self {
            TrueCalibration::Beta { a, b, c } => Some(CalibrationParams { a, b, c }),
            TrueCalibration::Piecewise { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TrueCalibration::Beta { a, b, c } => CalibrationParams::new(*a, *b, *c).map(|_| ()),
            TrueCalibration::Piecewise { knots } => {
                let pts = piecewise_points(knots);
                let increasing = pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
                if increasing {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(
                        "piecewise knots must be strictly increasing inside (0, 1)".into(),
                    ))
                }
            }
        }
    }

    /// `f*(s)`.
    pub fn honest(&self, s: f64) -> f64 {
        match self {
            TrueCalibration::Beta { a, b, c } => calibrate(s, &CalibrationParams { a: *a, b: *b, c: *c }),
            TrueCalibration::Piecewise { knots } => interpolate(&piecewise_points(knots), s, false),
        }
    }

    /// `f*⁻¹(p)`: the reported score whose honest probability is `p`.
    pub fn reported(&self, p: f64) -> f64 {
        match *self {
            TrueCalibration::Beta { a, b, c } => invert_beta(p, a, b, c),
            TrueCalibration::Piecewise { ref knots } => interpolate(&piecewise_points(knots), p, true),
        }
    }
}

fn piecewise_points(knots: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(knots.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend_from_slice(knots);
    pts.push((1.0, 1.0));
    pts
}

fn interpolate(pts: &[(f64, f64)], x: f64, inverse: bool) -> f64 {
    let key = |p: &(f64, f64)| if inverse { (p.1, p.0) } else { *p };
    let x = x.clamp(0.0, 1.0);
    for w in pts.windows(2) {
        let (x0, y0) = key(&w[0]);
        let (x1, y1) = key(&w[1]);
        if x <= x1 {
            return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
        }
    }
    1.0
}

/// Solves `f(s; a, b, c) = p` by bisection on `logit(s)` to 1e-10.
fn invert_beta(p: f64, a: f64, b: f64, c: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    let target = (p / (1.0 - p)).ln();
    // log-odds of f at logit(s) = t; ln s = -softplus(-t), ln(1-s) = -softplus(t)
    let h = |t: f64| c - a * softplus(-t) + b * softplus(t);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while h(lo) > target {
        lo *= 2.0;
    }
    while h(hi) < target {
        hi *= 2.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    crate::calibration::sigmoid(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub proportion: f64,
    pub positive_rate: f64,
    /// κ of the honest Beta(κπ, κ(1 − π)) probabilities; small values give
    /// a confident model.
    pub concentration: f64,
    pub calibration: TrueCalibration,
}

/// Analytic per-group rates of the generative model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupRates {
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
}

impl GroupRates {
    pub fn get(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Tpr => self.tpr,
            MetricKind::Fpr => self.fpr,
        }
    }
}

impl GroupSpec {
    fn shapes(&self) -> (f64, f64) {
        (
            self.concentration * self.positive_rate,
            self.concentration * (1.0 - self.positive_rate),
        )
    }

    /// Rates implied by the group recipe: the model predicts positive exactly when
    /// the honest probability reaches `f*(0.5)`.
    pub fn rates(&self) -> GroupRates {
        let (al, be) = self.shapes();
        let threshold = self.calibration.honest(0.5);
        let tpr = 1.0 - beta_reg(al + 1.0, be, threshold);
        let fpr = 1.0 - beta_reg(al, be + 1.0, threshold);
        let pi = self.positive_rate;
        GroupRates {
            tpr,
            fpr,
            accuracy: pi * tpr + (1.0 - pi) * (1.0 - fpr),
        }
    }
}

/// Concentration κ for which an honestly calibrated group with the given
/// positive rate reaches `tpr` at the 0.5 threshold.
pub fn concentration_for_tpr(positive_rate: f64, tpr: f64) -> Result<f64> {
    let rate = |k: f64| 1.0 - beta_reg(k * positive_rate + 1.0, k * (1.0 - positive_rate), 0.5);
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    if !(rate(hi.exp()) < tpr && rate(lo.exp()) > tpr) {
        return Err(Error::InvalidSpec(format!(
            "no concentration reaches TPR {tpr} at positive rate {positive_rate}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid.exp()) > tpr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub groups: Vec<GroupSpec>,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_population() -> usize {
    100_000
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.groups.len() < 2 {
            return bad("at least two groups are required".into());
        }
        if self.population == 0 {
            return bad("population must be positive".into());
        }
        let total: f64 = self.groups.iter().map(|g| g.proportion).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("group proportions sum to {total}, not 1"));
        }
        for g in &self.groups {
            if !(g.proportion > 0.0 && g.proportion <= 1.0) {
                return bad(format!("proportion of `{}` must lie in (0, 1]", g.name));
            }
            if !(g.positive_rate > 0.0 && g.positive_rate < 1.0) {
                return bad(format!("positive rate of `{}` must lie in (0, 1)", g.name));
            }
            if !(g.concentration > 0.0 && g.concentration.is_finite()) {
                return bad(format!("concentration of `{}` must be positive", g.name));
            }
            g.calibration.validate()?;
        }
        Ok(())
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    pub fn pair(&self, unprivileged: &str, privileged: &str) -> Result<GroupPair> {
        let id = |n: &str| {
            self.groups
                .iter()
                .position(|g| g.name == n)
                .map(GroupId)
                .ok_or_else(|| Error::UnknownGroupLabel(n.to_string()))
        };
        GroupPair::new(id(unprivileged)?, id(privileged)?)
    }

    /// Analytic Δ of `metric` in the infinite population.
    pub fn analytic_delta(&self, metric: MetricKind, pair: GroupPair) -> f64 {
        self.groups[pair.unprivileged.0].rates().get(metric) - self.groups[pair.privileged.0].rates().get(metric)
    }
}

/// A generated, fully labeled population together with the honest
/// probability behind each example.
#[derive(Clone, Debug)]
pub struct SyntheticPopulation {
    pub spec: SyntheticSpec,
    pub dataset: Dataset,
    pub honest: Vec<f64>,
}

impl SyntheticPopulation {
    /// Ground-truth Δ by frequency counts over the whole population.
    pub fn truth(&self, metric: MetricKind, pair: GroupPair) -> Option<f64> {
        freq_metric(&self.dataset, metric, pair).delta
    }

    pub fn true_calibration(&self, g: GroupId) -> &TrueCalibration {
        &self.spec.groups[g.0].calibration
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticPopulation> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed, 0);
    let weights = WeightedIndex::new(spec.groups.iter().map(|g| g.proportion))
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let class_dists: Vec<(Beta<f64>, Beta<f64>)> = spec
        .groups
        .iter()
        .map(|g| {
            let (al, be) = g.shapes();
            let pos = Beta::new(al + 1.0, be).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let neg = Beta::new(al, be + 1.0).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            Ok((pos, neg))
        })
        .collect::<Result<_>>()?;

    let mut examples = Vec::with_capacity(spec.population);
    let mut honest = Vec::with_capacity(spec.population);
    // every group gets at least one example so the dataset is valid
    let forced: Vec<usize> = (0..spec.groups.len()).collect();
    for i in 0..spec.population.max(spec.groups.len()) {
        let g = if i < spec.population {
            weights.sample(&mut rng)
        } else {
            forced[i - spec.population]
        };
        let gs = &spec.groups[g];
        let y = rng.gen_bool(gs.positive_rate);
        let p = if y {
            class_dists[g].0.sample(&mut rng)
        } else {
            class_dists[g].1.sample(&mut rng)
        };
        let s = gs.calibration.reported(p);
        examples.push(ScoredExample::new(s, GroupId(g), Some(y)));
        honest.push(p);
    }
    let dataset = Dataset::new(spec.group_names(), examples)?;
    Ok(SyntheticPopulation {
        spec: spec.clone(),
        dataset,
        honest,
    })
}
