//! Structured label-error injectors.
//!
//! Every injector is a pure function of `(dataset, spec)`. Randomness is
//! drawn per sample from `SplitMix64::stream(seed, [namespace, sample])`, and
//! every random decision is made per unit (entity span or whole image), never
//! per element. The returned [`CorruptionRecord`] keeps the input labels as
//! ground truth.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{ensure_valid, CorruptionRecord, Dataset, GridSample, Role, SequenceSample};
use crate::digest::{sha256_hex, CanonicalValue};
use crate::rng::{SplitMix64, RNG_NAME};
use crate::{Error, Result};

const STREAM_IMPRECISE: u64 = 0x11;
const STREAM_MISSING: u64 = 0x12;
const STREAM_MISCLASSIFY: u64 = 0x13;

/// How imprecise-boundary corruption chooses spans and extension lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpreciseMode {
    /// Every span, extended by 3.
    Fixed,
    /// Each span with probability 0.5, extended by 3.
    RandomHalf,
    /// Every span, extended by 1, 2 or 3 (uniform).
    Variable,
    /// Each span with probability 0.75, extended by 1, 2 or 3.
    RandomVariable,
}

impl ImpreciseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ImpreciseMode::Fixed => "fixed",
            ImpreciseMode::RandomHalf => "random_half",
            ImpreciseMode::Variable => "variable",
            ImpreciseMode::RandomVariable => "random_variable",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fixed" => ImpreciseMode::Fixed,
            "random_half" => ImpreciseMode::RandomHalf,
            "variable" => ImpreciseMode::Variable,
            "random_variable" => ImpreciseMode::RandomVariable,
            other => return Err(Error::InvalidParameter(format!("unknown imprecise mode {other:?}"))),
        })
    }

    fn selection_probability(self) -> f64 {
        match self {
            ImpreciseMode::Fixed | ImpreciseMode::Variable => 1.0,
            ImpreciseMode::RandomHalf => 0.5,
            ImpreciseMode::RandomVariable => 0.75,
        }
    }

    fn variable_length(self) -> bool {
        matches!(self, ImpreciseMode::Variable | ImpreciseMode::RandomVariable)
    }
}

pub const FIXED_EXTENSION: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorruptionKind {
    Imprecise {
        mode: ImpreciseMode,
    },
    MissingRandom {
        drop_rate: f64,
    },
    /// Uses the built-in weak tagger unless one is supplied explicitly.
    MissingSystematic,
    GridMisclassify {
        fraction: f64,
        from_label: usize,
        to_label: usize,
    },
    GridCoarsen {
        erode_px: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    #[serde(flatten)]
    pub kind: CorruptionKind,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            CorruptionKind::Imprecise { .. } => "imprecise",
            CorruptionKind::MissingRandom { .. } => "missing_random",
            CorruptionKind::MissingSystematic => "missing_systematic",
            CorruptionKind::GridMisclassify { .. } => "grid_misclassify",
            CorruptionKind::GridCoarsen { .. } => "grid_coarsen",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            CorruptionKind::MissingRandom { drop_rate: p } | CorruptionKind::GridMisclassify { fraction: p, .. } => {
                check_probability(p)
            }
            CorruptionKind::GridCoarsen { erode_px: 0 } => {
                Err(Error::InvalidParameter("erode_px must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn params(&self, tagger: Option<&str>) -> BTreeMap<String, CanonicalValue> {
        let mut p = BTreeMap::new();
        match &self.kind {
            CorruptionKind::Imprecise { mode } => {
                p.insert("mode".into(), CanonicalValue::Str(mode.as_str().into()));
            }
            CorruptionKind::MissingRandom { drop_rate } => {
                p.insert("drop_rate".into(), CanonicalValue::Float(*drop_rate));
            }
            CorruptionKind::MissingSystematic => {
                let name = tagger.unwrap_or(BUILTIN_TAGGER_NAME);
                p.insert("tagger".into(), CanonicalValue::Str(name.into()));
            }
            CorruptionKind::GridMisclassify { fraction, from_label, to_label } => {
                p.insert("fraction".into(), CanonicalValue::Float(*fraction));
                p.insert("from_label".into(), CanonicalValue::UInt(*from_label as u64));
                p.insert("to_label".into(), CanonicalValue::UInt(*to_label as u64));
            }
            CorruptionKind::GridCoarsen { erode_px } => {
                p.insert("erode_px".into(), CanonicalValue::UInt(*erode_px as u64));
            }
        }
        p
    }

    fn canonical_with(&self, tagger: Option<&str>) -> String {
        let mut obj = BTreeMap::new();
        obj.insert("kind".to_string(), CanonicalValue::Str(self.kind_name().into()));
        obj.insert("params".to_string(), CanonicalValue::Object(self.params(tagger)));
        obj.insert("rng".to_string(), CanonicalValue::Str(RNG_NAME.into()));
        obj.insert("seed".to_string(), CanonicalValue::UInt(self.seed));
        CanonicalValue::Object(obj).render()
    }

    /// Canonical JSON: sorted keys, no whitespace.
    pub fn canonical_json(&self) -> String {
        self.canonical_with(None)
    }

    /// SHA-256 hex of [`canonical_json`](Self::canonical_json).
    pub fn digest(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    /// Applies the corruption; systematic misses use [`BuiltinWeakTagger`].
    pub fn apply(&self, ds: &Dataset) -> Result<CorruptionRecord> {
        self.validate()?;
        match &self.kind {
            CorruptionKind::Imprecise { mode } => corrupt_imprecise(ds, *mode, self.seed),
            CorruptionKind::MissingRandom { drop_rate } => corrupt_missing_random(ds, *drop_rate, self.seed),
            CorruptionKind::MissingSystematic => corrupt_missing_systematic(ds, &BuiltinWeakTagger::default()),
            CorruptionKind::GridMisclassify { fraction, from_label, to_label } => {
                corrupt_grid_misclassify(ds, *fraction, *from_label, *to_label, self.seed)
            }
            CorruptionKind::GridCoarsen { erode_px } => corrupt_grid_coarsen(ds, *erode_px, self.seed),
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")))
    }
}

/// A maximal run of one non-background label: tokens `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntitySpan {
    pub sample_index: usize,
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl EntitySpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Spans of one label vector.
pub fn spans_in(sample_index: usize, labels: &[usize], background: usize) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut j = 0;
    while j < labels.len() {
        let label = labels[j];
        if label == background {
            j += 1;
            continue;
        }
        let start = j;
        while j < labels.len() && labels[j] == label {
            j += 1;
        }
        spans.push(EntitySpan { sample_index, start, end: j, label });
    }
    spans
}

/// All entity spans of a sequence dataset, sorted by `(sample, start)`.
pub fn find_entity_spans(ds: &Dataset) -> Result<Vec<EntitySpan>> {
    let samples = ds.as_sequences()?;
    ensure_valid(ds)?;
    let bg = ds.tagset.background();
    Ok(samples.iter().enumerate().flat_map(|(i, s)| spans_in(i, &s.labels, bg)).collect())
}

fn record(ds: &Dataset, labels: Vec<Vec<usize>>, spec_digest: String) -> Result<CorruptionRecord> {
    let true_labels = ds.label_slices().into_iter().map(<[usize]>::to_vec).collect();
    Ok(CorruptionRecord { corrupted: ds.with_labels(labels, Role::Corrupted)?, true_labels, spec_digest })
}

/// Extends selected spans rightward over following background tokens.
///
/// An extension stops at the end of the sentence and before any token that
/// carries a (different) entity label in the input.
pub fn corrupt_imprecise(ds: &Dataset, mode: ImpreciseMode, seed: u64) -> Result<CorruptionRecord> {
    let samples = ds.as_sequences()?;
    ensure_valid(ds)?;
    let spec = CorruptionSpec::new(CorruptionKind::Imprecise { mode }, seed);
    let bg = ds.tagset.background();
    let labels = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = SplitMix64::stream(seed, &[STREAM_IMPRECISE, i as u64]);
            let mut out = s.labels.clone();
            for span in spans_in(i, &s.labels, bg) {
                let selected = rng.bernoulli(mode.selection_probability());
                if !selected {
                    continue;
                }
                let length =
                    if mode.variable_length() { rng.range_inclusive(1, FIXED_EXTENSION) } else { FIXED_EXTENSION };
                let mut j = span.end;
                while j < s.labels.len() && j < span.end + length && s.labels[j] == bg {
                    out[j] = span.label;
                    j += 1;
                }
            }
            out
        })
        .collect();
    record(ds, labels, spec.digest())
}

/// Drops whole entity spans to background, each with probability `drop_rate`.
pub fn corrupt_missing_random(ds: &Dataset, drop_rate: f64, seed: u64) -> Result<CorruptionRecord> {
    check_probability(drop_rate)?;
    let samples = ds.as_sequences()?;
    ensure_valid(ds)?;
    let spec = CorruptionSpec::new(CorruptionKind::MissingRandom { drop_rate }, seed);
    let bg = ds.tagset.background();
    let labels = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = SplitMix64::stream(seed, &[STREAM_MISSING, i as u64]);
            let mut out = s.labels.clone();
            for span in spans_in(i, &s.labels, bg) {
                if rng.bernoulli(drop_rate) {
                    out[span.start..span.end].fill(bg);
                }
            }
            out
        })
        .collect();
    record(ds, labels, spec.digest())
}

/// Marks tokens a weak entity recognizer would call entities.
pub trait WeakTagger {
    /// Stable identifier, recorded in the corruption digest.
    fn name(&self) -> String;
    fn mark(&self, sample: &SequenceSample) -> Vec<bool>;
}

pub const BUILTIN_TAGGER_NAME: &str = "builtin-caps-digit-gazetteer-v1";

/// Rule-based recognizer: capitalized tokens that are not sentence-initial,
/// all-digit tokens, and tokens whose lowercase form is in the gazetteer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinWeakTagger {
    pub gazetteer: Vec<String>,
}

impl Default for BuiltinWeakTagger {
    fn default() -> Self {
        let words = [
            "january",
            "february",
            "march",
            "april",
            "june",
            "july",
            "august",
            "september",
            "october",
            "november",
            "december",
            "monday",
            "tuesday",
            "wednesday",
            "thursday",
            "friday",
            "saturday",
            "sunday",
        ];
        Self { gazetteer: words.iter().map(|w| w.to_string()).collect() }
    }
}

impl WeakTagger for BuiltinWeakTagger {
    fn name(&self) -> String {
        if *self == Self::default() {
            BUILTIN_TAGGER_NAME.to_string()
        } else {
            format!("{BUILTIN_TAGGER_NAME}+gazetteer:{}", self.gazetteer.join("|"))
        }
    }

    fn mark(&self, sample: &SequenceSample) -> Vec<bool> {
        sample
            .tokens
            .iter()
            .enumerate()
            .map(|(j, tok)| {
                let capitalized = tok.chars().next().is_some_and(char::is_uppercase);
                (capitalized && j > 0)
                    || crate::features::is_digit(tok)
                    || self.gazetteer.iter().any(|g| *g == tok.to_lowercase())
            })
            .collect()
    }
}

/// Keeps an entity label only where the weak tagger also marks the token.
pub fn corrupt_missing_systematic(ds: &Dataset, tagger: &dyn WeakTagger) -> Result<CorruptionRecord> {
    let samples = ds.as_sequences()?;
    ensure_valid(ds)?;
    let bg = ds.tagset.background();
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        let marks = tagger.mark(s);
        if marks.len() != s.len() {
            return Err(Error::LengthMismatch { what: "weak tagger output", expected: s.len(), found: marks.len() });
        }
        labels.push(s.labels.iter().zip(&marks).map(|(&l, &marked)| if l != bg && marked { l } else { bg }).collect());
    }
    let name = tagger.name();
    let spec = CorruptionSpec::new(CorruptionKind::MissingSystematic, 0);
    let digest = sha256_hex(spec.canonical_with(Some(&name)).as_bytes());
    record(ds, labels, digest)
}

/// Relabels every `from_label` pixel as `to_label` in a random subset of
/// whole images, each image selected with probability `fraction`.
pub fn corrupt_grid_misclassify(
    ds: &Dataset,
    fraction: f64,
    from_label: usize,
    to_label: usize,
    seed: u64,
) -> Result<CorruptionRecord> {
    check_probability(fraction)?;
    let samples = ds.as_grids()?;
    ensure_valid(ds)?;
    let k = ds.tagset.len();
    if from_label >= k || to_label >= k {
        return Err(Error::InvalidParameter(format!("labels {from_label} -> {to_label} out of range for {k} labels")));
    }
    if from_label == to_label {
        return Err(Error::InvalidParameter("from_label equals to_label".into()));
    }
    let spec = CorruptionSpec::new(CorruptionKind::GridMisclassify { fraction, from_label, to_label }, seed);
    let labels = samples
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = SplitMix64::stream(seed, &[STREAM_MISCLASSIFY, i as u64]);
            let flip = rng.bernoulli(fraction);
            g.labels.iter().map(|&l| if flip && l == from_label { to_label } else { l }).collect()
        })
        .collect();
    record(ds, labels, spec.digest())
}

/// Erodes every non-background class region by `erode_px` pixels.
///
/// A pixel of class `c` keeps its label iff every in-image pixel within
/// Chebyshev distance `erode_px` also has class `c`; otherwise it becomes
/// background. Pixels outside the image do not erode. Regions thinner than
/// the structuring element vanish. `seed` only enters the digest.
pub fn corrupt_grid_coarsen(ds: &Dataset, erode_px: usize, seed: u64) -> Result<CorruptionRecord> {
    let samples = ds.as_grids()?;
    ensure_valid(ds)?;
    if erode_px == 0 {
        return Err(Error::InvalidParameter("erode_px must be at least 1".into()));
    }
    for g in samples {
        if 2 * erode_px >= g.height.min(g.width) {
            return Err(Error::InvalidParameter(format!(
                "erode_px {erode_px} is degenerate for a {}x{} grid",
                g.height, g.width
            )));
        }
    }
    let spec = CorruptionSpec::new(CorruptionKind::GridCoarsen { erode_px }, seed);
    let bg = ds.tagset.background();
    let labels = samples.iter().map(|g| erode_labels(g, erode_px, bg)).collect();
    record(ds, labels, spec.digest())
}

/// Per-class binary erosion with a `(2r+1)^2` square, computed separably.
pub fn erode_labels(g: &GridSample, radius: usize, background: usize) -> Vec<usize> {
    let (h, w) = (g.height, g.width);
    // keep[p] = every pixel in the row window around p has p's label
    let mut row_ok = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let label = g.labels[r * w + c];
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(w - 1);
            row_ok[r * w + c] = (lo..=hi).all(|cc| g.labels[r * w + cc] == label);
        }
    }
    let mut out = g.labels.clone();
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            let label = g.labels[idx];
            if label == background {
                continue;
            }
            let lo = r.saturating_sub(radius);
            let hi = (r + radius).min(h - 1);
            let keep = (lo..=hi).all(|rr| row_ok[rr * w + c] && g.labels[rr * w + c] == label);
            if !keep {
                out[idx] = background;
            }
        }
    }
    out
}
