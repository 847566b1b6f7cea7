//! Frequentist plug-in estimates of per-group metrics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{Dataset, GroupId, GroupPair, MetricKind};

/// Numerator and denominator of a metric for one group's labeled examples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MetricCounts {
    pub successes: usize,
    pub trials: usize,
}

impl MetricCounts {
    pub fn failures(&self) -> usize {
        self.trials - self.successes
    }

    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }
}

/// Counts the labeled examples of `group`; unlabeled examples are ignored.
pub fn metric_counts(data: &Dataset, metric: MetricKind, group: GroupId) -> MetricCounts {
    data.in_group(group)
        .filter_map(|ex| metric.outcome(ex))
        .fold(MetricCounts::default(), |mut c, hit| {
            c.trials += 1;
            c.successes += hit as usize;
            c
        })
}

/// Per-group estimates for a pair; `None` marks a zero-count conditioning
/// event.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreqEstimate {
    pub per_group: BTreeMap<GroupId, Option<f64>>,
    pub delta: Option<f64>,
}

pub fn freq_metric(labeled: &Dataset, metric: MetricKind, pair: GroupPair) -> FreqEstimate {
    let unpriv = metric_counts(labeled, metric, pair.unprivileged).rate();
    let priv_ = metric_counts(labeled, metric, pair.privileged).rate();
    let delta = unpriv.zip(priv_).map(|(a, b)| a - b);
    let per_group = BTreeMap::from([(pair.unprivileged, unpriv), (pair.privileged, priv_)]);
    FreqEstimate { per_group, delta }
}
