//! Fine-grained labeled data: tag sets, sequence and grid samples, datasets.
//!
//! Labels are stored as indices into a [`TagSet`]; one-hot encodings are
//! computed on demand. Every tag set has a background class, and elements
//! nobody annotated are background.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTagSet", into = "RawTagSet")]
pub struct TagSet {
    labels: Vec<String>,
    background: usize,
}

#[derive(Serialize, Deserialize)]
struct RawTagSet {
    labels: Vec<String>,
    background: usize,
}

impl TryFrom<RawTagSet> for TagSet {
    type Error = Error;
    fn try_from(raw: RawTagSet) -> Result<Self> {
        TagSet::new(raw.labels, raw.background)
    }
}

impl From<TagSet> for RawTagSet {
    fn from(t: TagSet) -> Self {
        RawTagSet { labels: t.labels, background: t.background }
    }
}

impl TagSet {
    pub fn new(labels: Vec<String>, background: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidTagSet("no labels".into()));
        }
        for (i, name) in labels.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidTagSet(format!("label {i} is empty")));
            }
            if labels[..i].contains(name) {
                return Err(Error::InvalidTagSet(format!("duplicate label {name:?}")));
            }
        }
        if background >= labels.len() {
            return Err(Error::InvalidTagSet(format!(
                "background index {background} out of range for {} labels",
                labels.len()
            )));
        }
        Ok(Self { labels, background })
    }

    /// Background defaults to the label named `O` or `background`.
    pub fn with_default_background(labels: Vec<String>) -> Result<Self> {
        let background = labels.iter().position(|l| l == "O" || l == "background").ok_or_else(|| {
            Error::InvalidTagSet("no label named `O` or `background` and no explicit background".into())
        })?;
        Self::new(labels, background)
    }

    pub fn from_names(names: &[&str], background: usize) -> Result<Self> {
        Self::new(names.iter().map(|s| s.to_string()).collect(), background)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn background(&self) -> usize {
        self.background
    }

    pub fn is_background(&self, index: usize) -> bool {
        index == self.background
    }

    pub fn one_hot(&self, index: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.len()];
        v[index] = 1.0;
        v
    }
}

/// Value of one named token feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Num(f64),
    Str(String),
}

impl FeatureValue {
    pub fn flag(b: bool) -> Self {
        FeatureValue::Num(if b { 1.0 } else { 0.0 })
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            FeatureValue::Str(s) => Some(s),
            FeatureValue::Num(_) => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(x) => Some(*x),
            FeatureValue::Str(_) => None,
        }
    }
}

impl From<&str> for FeatureValue {
    fn from(s: &str) -> Self {
        FeatureValue::Str(s.to_string())
    }
}

pub type FeatureMap = BTreeMap<String, FeatureValue>;

/// One tokenized sentence. `features` holds optional extra per-token
/// features (e.g. read from additional file columns); the standard token
/// features are computed from `tokens` by the feature extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub tokens: Vec<String>,
    pub features: Vec<FeatureMap>,
    pub labels: Vec<usize>,
}

impl SequenceSample {
    /// Sample without extra features.
    pub fn new(tokens: Vec<String>, labels: Vec<usize>) -> Self {
        let features = alloc::vec![FeatureMap::new(); tokens.len()];
        Self { tokens, features, labels }
    }

    pub fn from_strs(tokens: &[&str], labels: &[usize]) -> Self {
        Self::new(tokens.iter().map(|t| t.to_string()).collect(), labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Row-major image with per-pixel labels. Channels are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<[f64; 3]>,
    pub labels: Vec<usize>,
}

impl GridSample {
    pub fn new(height: usize, width: usize, pixels: Vec<[f64; 3]>, labels: Vec<usize>) -> Self {
        Self { height, width, pixels, labels }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Corrupted,
    Gold,
    Test,
    Clean,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Corrupted => "corrupted",
            Role::Gold => "gold",
            Role::Test => "test",
            Role::Clean => "clean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Samples {
    Sequence(Vec<SequenceSample>),
    Grid(Vec<GridSample>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub tagset: TagSet,
    pub samples: Samples,
    pub role: Role,
}

impl Dataset {
    pub fn sequences(tagset: TagSet, samples: Vec<SequenceSample>, role: Role) -> Self {
        Self { tagset, samples: Samples::Sequence(samples), role }
    }

    pub fn grids(tagset: TagSet, samples: Vec<GridSample>, role: Role) -> Self {
        Self { tagset, samples: Samples::Grid(samples), role }
    }

    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Sequence(s) => s.len(),
            Samples::Grid(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self.samples, Samples::Sequence(_))
    }

    pub fn kind_name(&self) -> &'static str {
        if self.is_sequence() {
            "sequence"
        } else {
            "grid"
        }
    }

    pub fn as_sequences(&self) -> Result<&[SequenceSample]> {
        match &self.samples {
            Samples::Sequence(s) => Ok(s),
            Samples::Grid(_) => Err(Error::WrongKind { expected: "sequence" }),
        }
    }

    pub fn as_grids(&self) -> Result<&[GridSample]> {
        match &self.samples {
            Samples::Grid(s) => Ok(s),
            Samples::Sequence(_) => Err(Error::WrongKind { expected: "grid" }),
        }
    }

    pub fn labels_of(&self, index: usize) -> &[usize] {
        match &self.samples {
            Samples::Sequence(s) => &s[index].labels,
            Samples::Grid(s) => &s[index].labels,
        }
    }

    pub fn label_slices(&self) -> Vec<&[usize]> {
        (0..self.len()).map(|i| self.labels_of(i)).collect()
    }

    pub fn element_count(&self) -> usize {
        (0..self.len()).map(|i| self.labels_of(i).len()).sum()
    }

    /// Copy with the labels replaced; inputs are untouched.
    pub fn with_labels(&self, labels: Vec<Vec<usize>>, role: Role) -> Result<Dataset> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch { what: "label sets", expected: self.len(), found: labels.len() });
        }
        for (i, l) in labels.iter().enumerate() {
            let expected = self.labels_of(i).len();
            if l.len() != expected {
                return Err(Error::LengthMismatch { what: "sample labels", expected, found: l.len() });
            }
        }
        let samples = match &self.samples {
            Samples::Sequence(s) => Samples::Sequence(
                s.iter().zip(labels).map(|(x, labels)| SequenceSample { labels, ..x.clone() }).collect(),
            ),
            Samples::Grid(s) => {
                Samples::Grid(s.iter().zip(labels).map(|(x, labels)| GridSample { labels, ..x.clone() }).collect())
            }
        };
        Ok(Dataset { tagset: self.tagset.clone(), samples, role })
    }

    /// Samples of `self` followed by those of `other`.
    pub fn concat(&self, other: &Dataset, role: Role) -> Result<Dataset> {
        if self.tagset != other.tagset {
            return Err(Error::TagSetMismatch);
        }
        let samples = match (&self.samples, &other.samples) {
            (Samples::Sequence(a), Samples::Sequence(b)) => Samples::Sequence(a.iter().chain(b).cloned().collect()),
            (Samples::Grid(a), Samples::Grid(b)) => Samples::Grid(a.iter().chain(b).cloned().collect()),
            _ => return Err(Error::WrongKind { expected: self.kind_name() }),
        };
        Ok(Dataset { tagset: self.tagset.clone(), samples, role })
    }

    /// Sub-dataset with the given sample indices, in order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let samples = match &self.samples {
            Samples::Sequence(s) => Samples::Sequence(indices.iter().map(|&i| s[i].clone()).collect()),
            Samples::Grid(s) => Samples::Grid(indices.iter().map(|&i| s[i].clone()).collect()),
        };
        Dataset { tagset: self.tagset.clone(), samples, role: self.role }
    }

    /// Checks that `other` has the same sample kind and per-sample lengths.
    pub fn check_same_shape(&self, other: &Dataset) -> Result<()> {
        if self.is_sequence() != other.is_sequence() {
            return Err(Error::WrongKind { expected: self.kind_name() });
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { what: "sample count", expected: self.len(), found: other.len() });
        }
        for i in 0..self.len() {
            let (a, b) = (self.labels_of(i).len(), other.labels_of(i).len());
            if a != b {
                return Err(Error::LengthMismatch { what: "sample length", expected: a, found: b });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    EmptySample,
    LengthMismatch { tokens: usize, features: usize, labels: usize },
    LabelOutOfRange { label: usize, labels: usize },
    ShapeMismatch { expected: usize, pixels: usize, labels: usize },
    ChannelOutOfRange { channel: usize, value: f64 },
}

/// One failed invariant, located by sample and (where meaningful) element.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sample: usize,
    pub element: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sample {}", self.sample)?;
        if let Some(e) = self.element {
            write!(f, ", element {e}")?;
        }
        match &self.kind {
            ViolationKind::EmptySample => f.write_str(": empty sample"),
            ViolationKind::LengthMismatch { tokens, features, labels } => {
                write!(f, ": length mismatch (tokens={tokens}, features={features}, labels={labels})")
            }
            ViolationKind::LabelOutOfRange { label, labels } => {
                write!(f, ": label index {label} out of range for {labels} labels")
            }
            ViolationKind::ShapeMismatch { expected, pixels, labels } => {
                write!(f, ": shape mismatch (expected {expected} elements, pixels={pixels}, labels={labels})")
            }
            ViolationKind::ChannelOutOfRange { channel, value } => {
                write!(f, ": channel {channel} value {value} outside [0, 1]")
            }
        }
    }
}

/// Every invariant violation in `ds`; empty iff the dataset is valid.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let k = ds.tagset.len();
    let mut out = Vec::new();
    let check_labels = |out: &mut Vec<Violation>, sample: usize, labels: &[usize]| {
        for (j, &label) in labels.iter().enumerate() {
            if label >= k {
                out.push(Violation {
                    sample,
                    element: Some(j),
                    kind: ViolationKind::LabelOutOfRange { label, labels: k },
                });
            }
        }
    };
    match &ds.samples {
        Samples::Sequence(samples) => {
            for (i, s) in samples.iter().enumerate() {
                let (t, f, l) = (s.tokens.len(), s.features.len(), s.labels.len());
                if t == 0 && f == 0 && l == 0 {
                    out.push(Violation { sample: i, element: None, kind: ViolationKind::EmptySample });
                } else if t != f || t != l {
                    out.push(Violation {
                        sample: i,
                        element: None,
                        kind: ViolationKind::LengthMismatch { tokens: t, features: f, labels: l },
                    });
                }
                check_labels(&mut out, i, &s.labels);
            }
        }
        Samples::Grid(samples) => {
            for (i, g) in samples.iter().enumerate() {
                let expected = g.height * g.width;
                if expected == 0 {
                    out.push(Violation { sample: i, element: None, kind: ViolationKind::EmptySample });
                }
                if g.pixels.len() != expected || g.labels.len() != expected {
                    out.push(Violation {
                        sample: i,
                        element: None,
                        kind: ViolationKind::ShapeMismatch { expected, pixels: g.pixels.len(), labels: g.labels.len() },
                    });
                }
                for (j, px) in g.pixels.iter().enumerate() {
                    for (c, &v) in px.iter().enumerate() {
                        if !(0.0..=1.0).contains(&v) {
                            out.push(Violation {
                                sample: i,
                                element: Some(j),
                                kind: ViolationKind::ChannelOutOfRange { channel: c, value: v },
                            });
                        }
                    }
                }
                check_labels(&mut out, i, &g.labels);
            }
        }
    }
    out
}

pub fn ensure_valid(ds: &Dataset) -> Result<()> {
    let report = validate_dataset(ds);
    if report.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidDataset(report))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    /// Element count per label index.
    pub per_label: Vec<usize>,
    pub samples: usize,
    pub elements: usize,
}

impl DatasetStats {
    pub fn count(&self, tagset: &TagSet, name: &str) -> usize {
        tagset.index_of(name).map_or(0, |i| self.per_label[i])
    }
}

pub fn dataset_stats(ds: &Dataset) -> Result<DatasetStats> {
    ensure_valid(ds)?;
    let mut per_label = alloc::vec![0usize; ds.tagset.len()];
    let mut elements = 0;
    for i in 0..ds.len() {
        for &l in ds.labels_of(i) {
            per_label[l] += 1;
            elements += 1;
        }
    }
    Ok(DatasetStats { per_label, samples: ds.len(), elements })
}

/// A corrupted dataset together with the labels it had before corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionRecord {
    pub corrupted: Dataset,
    pub true_labels: Vec<Vec<usize>>,
    pub spec_digest: String,
}

impl CorruptionRecord {
    pub fn changed_elements(&self) -> usize {
        (0..self.corrupted.len())
            .map(|i| self.corrupted.labels_of(i).iter().zip(&self.true_labels[i]).filter(|(a, b)| a != b).count())
            .sum()
    }

    pub fn corrupted_fraction(&self) -> f64 {
        let total = self.corrupted.element_count();
        if total == 0 {
            0.0
        } else {
            self.changed_elements() as f64 / total as f64
        }
    }

    /// The uncorrupted dataset, with the given role.
    pub fn true_dataset(&self, role: Role) -> Dataset {
        self.corrupted.with_labels(self.true_labels.clone(), role).expect("true labels shape-match by construction")
    }
}
