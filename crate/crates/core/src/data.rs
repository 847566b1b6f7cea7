//! Scored examples, datasets and CSV ingestion.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;

/// Lower clamp applied to ingested scores; the upper clamp is `1 - SCORE_EPS`.
pub const SCORE_EPS: f64 = 1e-6;

pub fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

/// Dense group index, assigned in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub usize);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    pub group: GroupId,
    pub label: Option<bool>,
}

impl ScoredExample {
    pub fn new(score: f64, group: GroupId, label: Option<bool>) -> Self {
        Self {
            score,
            group,
            label,
        }
    }

    /// Hard prediction; ties at 0.5 go to the positive class.
    #[inline]
    pub fn prediction(&self) -> bool {
        self.score >= 0.5
    }

    pub fn is_correct(&self) -> Option<bool> {
        self.label.map(|y| y == self.prediction())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Accuracy,
    Tpr,
    Fpr,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Accuracy, MetricKind::Tpr, MetricKind::Fpr];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Tpr => "tpr",
            MetricKind::Fpr => "fpr",
        }
    }

    /// Whether a labeled example enters the metric's denominator, and if so
    /// whether it counts as a success.
    #[inline]
    pub fn outcome(self, example: &ScoredExample) -> Option<bool> {
        let y = example.label?;
        let pred = example.prediction();
        match self {
            MetricKind::Accuracy => Some(pred == y),
            MetricKind::Tpr => y.then_some(pred),
            MetricKind::Fpr => (!y).then_some(pred),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(MetricKind::Accuracy),
            "tpr" => Ok(MetricKind::Tpr),
            "fpr" => Ok(MetricKind::Fpr),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// The two groups compared by Δ = θ(unprivileged) − θ(privileged).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupPair {
    pub unprivileged: GroupId,
    pub privileged: GroupId,
}

impl GroupPair {
    pub fn new(unprivileged: GroupId, privileged: GroupId) -> Result<Self> {
        if unprivileged == privileged {
            return Err(Error::InvalidPair);
        }
        Ok(Self {
            unprivileged,
            privileged,
        })
    }

    pub fn swapped(self) -> Self {
        Self {
            unprivileged: self.privileged,
            privileged: self.unprivileged,
        }
    }
}

/// An immutable collection of scored examples over a fixed set of groups.
///
/// Labeled and unlabeled subsets are themselves `Dataset`s sharing the group
/// table ("views"); only top-level construction requires every group to be
/// present.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    groups: Arc<[String]>,
    examples: Vec<ScoredExample>,
}

impl Dataset {
    /// Builds a validated dataset. Scores are clamped into
    /// `[SCORE_EPS, 1 - SCORE_EPS]`.
    pub fn new(groups: Vec<String>, examples: Vec<ScoredExample>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = vec![false; groups.len()];
        for ex in &examples {
            if !(0.0..=1.0).contains(&ex.score) {
                return Err(Error::InvalidSpec(format!("score {} outside [0, 1]", ex.score)));
            }
            match seen.get_mut(ex.group.0) {
                Some(s) => *s = true,
                None => return Err(Error::UnknownGroupLabel(ex.group.to_string())),
            }
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::MissingGroup(groups[g].clone()));
        }
        let examples = examples
            .into_iter()
            .map(|ex| ScoredExample {
                score: clamp_score(ex.score),
                ..ex
            })
            .collect();
        Ok(Self {
            groups: groups.into(),
            examples,
        })
    }

    /// A view over a subset of this dataset's examples; may be empty and may
    /// miss groups.
    pub fn view(&self, examples: Vec<ScoredExample>) -> Self {
        Self {
            groups: Arc::clone(&self.groups),
            examples,
        }
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_name(&self, g: GroupId) -> &str {
        &self.groups[g.0]
    }

    pub fn group_id(&self, name: &str) -> Result<GroupId> {
        self.groups
            .iter()
            .position(|n| n == name)
            .map(GroupId)
            .ok_or_else(|| Error::UnknownGroupLabel(name.to_string()))
    }

    pub fn pair(&self, unprivileged: &str, privileged: &str) -> Result<GroupPair> {
        GroupPair::new(self.group_id(unprivileged)?, self.group_id(privileged)?)
    }

    pub fn examples(&self) -> &[ScoredExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_labeled(&self) -> usize {
        self.examples.iter().filter(|e| e.label.is_some()).count()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.len() - self.n_labeled()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_some())
    }

    pub fn in_group(&self, g: GroupId) -> impl Iterator<Item = &ScoredExample> {
        self.examples.iter().filter(move |e| e.group == g)
    }

    pub fn labeled(&self) -> Self {
        self.view(self.examples.iter().copied().filter(|e| e.label.is_some()).collect())
    }

    pub fn unlabeled(&self) -> Self {
        self.view(self.examples.iter().copied().filter(|e| e.label.is_none()).collect())
    }

    /// Same examples with every label removed.
    pub fn masked(&self) -> Self {
        self.view(
            self.examples
                .iter()
                .map(|e| ScoredExample { label: None, ..*e })
                .collect(),
        )
    }

    /// Draws `n` examples uniformly without replacement to keep their labels;
    /// the rest form the unlabeled pool with labels masked. Both views keep
    /// the original example order.
    pub fn split_labeled(&self, n: usize, seed: u64) -> Result<(Self, Self)> {
        let unlabeled = self.n_unlabeled();
        if unlabeled > 0 {
            return Err(Error::NotFullyLabeled { unlabeled });
        }
        if n == 0 || n > self.len() {
            return Err(Error::NTooLarge {
                requested: n,
                available: self.len(),
            });
        }
        let mut rng = seeded_rng(seed, 0);
        let mut keep = vec![false; self.len()];
        for i in index::sample(&mut rng, self.len(), n) {
            keep[i] = true;
        }
        let mut labeled = Vec::with_capacity(n);
        let mut pool = Vec::with_capacity(self.len() - n);
        for (ex, k) in self.examples.iter().zip(keep) {
            if k {
                labeled.push(*ex);
            } else {
                pool.push(ScoredExample { label: None, ..*ex });
            }
        }
        Ok((self.view(labeled), self.view(pool)))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["score", "group", "label"])?;
        for ex in &self.examples {
            let label = match ex.label {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            w.write_record([ex.score.to_string().as_str(), self.group_name(ex.group), label])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Column mapping for CSV ingestion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub score: String,
    pub group: String,
    pub label: String,
    /// Declared groups in id order. When absent, groups get ids in order of
    /// first appearance.
    pub groups: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            score: "score".into(),
            group: "group".into(),
            label: "label".into(),
            groups: None,
        }
    }
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(std::io::BufReader::new(file), schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let score_col = column(&schema.score).ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: format!("missing score column `{}`", schema.score),
    })?;
    let group_col = column(&schema.group).ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: format!("missing group column `{}`", schema.group),
    })?;
    let label_col = column(&schema.label);

    let declared = schema.groups.is_some();
    let mut groups: Vec<String> = schema.groups.clone().unwrap_or_default();
    let mut examples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        let cell = |c: usize| record.get(c).map(str::trim).unwrap_or("");

        let raw_score = cell(score_col);
        if raw_score.is_empty() {
            return Err(malformed("missing score".into()));
        }
        let score: f64 = raw_score
            .parse()
            .map_err(|_| malformed(format!("score `{raw_score}` is not a number")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(malformed(format!("score {score} outside [0, 1]")));
        }

        let name = cell(group_col);
        if name.is_empty() {
            return Err(malformed("missing group".into()));
        }
        let group = match groups.iter().position(|g| g == name) {
            Some(g) => GroupId(g),
            None if declared => return Err(Error::UnknownGroupLabel(name.to_string())),
            None => {
                groups.push(name.to_string());
                GroupId(groups.len() - 1)
            }
        };

        let label = match label_col.map(cell).unwrap_or("") {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(malformed(format!("label `{other}` is not 0, 1 or empty"))),
        };
        examples.push(ScoredExample::new(score, group, label));
    }
    Dataset::new(groups, examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ingest(text: &str) -> Result<Dataset> {
        ingest_reader(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn fully_labeled_file() {
        let ds = ingest("score,group,label\n0.9,a,1\n0.2,b,0\n0.4,a,1\n").unwrap();
        assert_eq!((ds.n_labeled(), ds.n_unlabeled()), (3, 0));
        assert_eq!(ds.groups(), ["a", "b"]);
    }

    #[test]
    fn empty_label_cells_are_unlabeled() {
        let ds = ingest("score,group,label\n0.9,a,1\n0.2,b,\n0.4,a,1\n0.7,b,\n0.1,a,0\n").unwrap();
        assert_eq!((ds.n_labeled(), ds.n_unlabeled()), (3, 2));
    }

    #[test]
    fn boundary_scores_are_clamped() {
        let ds = ingest("score,group,label\n1.0,a,1\n0,a,0\n").unwrap();
        assert_eq!(ds.examples()[0].score, 1.0 - 1e-6);
        assert_eq!(ds.examples()[1].score, 1e-6);
    }

    #[test]
    fn missing_score_reports_line() {
        let err = ingest("score,group,label\n0.5,a,1\n,a,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = ingest("score,group,label\n0.5,,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err}");
        let err = ingest("score,group,label\n0.5,a,2\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err}");
        let err = ingest("score,group,label\n1.5,a,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err}");
    }

    #[test]
    fn declared_groups() {
        let schema = CsvSchema {
            groups: Some(vec!["b".into(), "a".into()]),
            ..CsvSchema::default()
        };
        let ds = ingest_reader("score,group,label\n0.9,a,1\n0.2,b,0\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.group_id("b").unwrap(), GroupId(0));
        let err = ingest_reader("score,group,label\n0.9,c,1\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::UnknownGroupLabel(_)));
        let err = ingest_reader("score,group,label\n0.9,a,1\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::MissingGroup(_)));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(ingest("score,group,label\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn custom_columns_and_missing_label_column() {
        let schema = CsvSchema {
            score: "p".into(),
            group: "race".into(),
            label: "y".into(),
            groups: None,
        };
        let ds = ingest_reader("race,p\nx,0.3\ny,0.8\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.n_unlabeled(), 2);
    }

    fn labeled_population(n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| {
                let g = if i % 5 == 0 { 1 } else { 0 };
                ScoredExample::new((i as f64 + 0.5) / n as f64, GroupId(g), Some(i % 3 == 0))
            })
            .collect();
        Dataset::new(vec!["maj".into(), "min".into()], examples).unwrap()
    }

    #[test]
    fn split_degenerate_and_deterministic() {
        let ds = labeled_population(200);
        let (lab, unl) = ds.split_labeled(200, 7).unwrap();
        assert_eq!(lab.len(), 200);
        assert!(unl.is_empty());
        let a = ds.split_labeled(50, 11).unwrap();
        let b = ds.split_labeled(50, 11).unwrap();
        assert_eq!(a, b);
        assert!(matches!(ds.split_labeled(201, 1), Err(Error::NTooLarge { .. })));
        assert!(matches!(
            ds.masked().split_labeled(5, 1),
            Err(Error::NotFullyLabeled { .. })
        ));
    }

    #[test]
    fn split_group_frequencies_follow_hypergeometric() {
        // 1000 rows, 200 in the minority group; 50 drawn without replacement.
        // Hypergeometric mean of minority count is 50 * 0.2 = 10, variance
        // 50 * 0.2 * 0.8 * 950 / 999 = 7.6076.
        let ds = labeled_population(1000);
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for r in 0..reps {
            let (lab, unl) = ds.split_labeled(50, r).unwrap();
            assert_eq!((lab.len(), unl.len()), (50, 950));
            let k = lab.in_group(GroupId(1)).count() as f64;
            sum += k;
            sum_sq += k * k;
        }
        let mean = sum / reps as f64;
        let var = sum_sq / reps as f64 - mean * mean;
        let se = (7.6076_f64 / reps as f64).sqrt();
        assert!((mean - 10.0).abs() < 4.0 * se, "mean {mean}");
        assert!((var - 7.6076).abs() < 0.05 * 7.6076, "var {var}");
    }

    proptest! {
        #[test]
        fn split_partitions(n in 1usize..120, seed in any::<u64>()) {
            let ds = labeled_population(120);
            let (lab, unl) = ds.split_labeled(n, seed).unwrap();
            prop_assert_eq!(lab.len() + unl.len(), 120);
            prop_assert!(lab.is_fully_labeled());
            prop_assert_eq!(unl.n_labeled(), 0);
            // each original example lands in exactly one view, order kept
            let mut li = lab.examples().iter().peekable();
            let mut ui = unl.examples().iter().peekable();
            for ex in ds.examples() {
                if li.peek().is_some_and(|l| *l == ex) {
                    li.next();
                } else {
                    let u = ui.next().unwrap();
                    prop_assert_eq!((u.score, u.group, u.label), (ex.score, ex.group, None));
                }
            }
        }

        #[test]
        fn csv_round_trip(rows in proptest::collection::vec((0.0f64..=1.0, 0usize..3, proptest::option::of(any::<bool>())), 3..40)) {
            let mut examples: Vec<_> = rows
                .iter()
                .map(|&(s, g, y)| ScoredExample::new(s, GroupId(g), y))
                .collect();
            for g in 0..3 {
                examples.push(ScoredExample::new(0.5, GroupId(g), None));
            }
            let names = vec!["g0".to_string(), "g1".to_string(), "g2".to_string()];
            let ds = Dataset::new(names.clone(), examples).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let schema = CsvSchema { groups: Some(names), ..CsvSchema::default() };
            let back = ingest_reader(buf.as_slice(), &schema).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
