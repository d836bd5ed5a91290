//! Seeded synthetic corpora: tagged sentences and labeled street-like grids.
//!
//! Each split draws every sample from its own stream
//! `(seed, split, sample_index)`, so split sizes never influence each other's
//! content. Vocabularies come from a separate `(seed, vocab)` stream and are
//! shared by all splits.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GridSample, Role, SequenceSample, TagSet};
use crate::rng::SplitMix64;
use crate::{Error, Result};

const STREAM_VOCAB: u64 = 0x21;
const STREAM_TRAIN: u64 = 0x22;
const STREAM_GOLD: u64 = 0x23;
const STREAM_TEST: u64 = 0x24;

/// Sequence tag set: background `O` plus eight entity classes.
pub const SEQ_LABELS: [&str; 9] = ["O", "GEO", "ORG", "PER", "GPE", "TIM", "ART", "EVE", "NAT"];
/// Relative frequency of each entity class (index-aligned with `SEQ_LABELS[1..]`).
const CLASS_WEIGHTS: [f64; 8] = [0.30, 0.16, 0.13, 0.13, 0.16, 0.04, 0.04, 0.04];
const CLASS_SUFFIXES: [&[&str]; 8] = [
    &["ia", "land", "stan", "burg", "ova"],
    &["corp", "tel", "bank", "ex", "ium"],
    &["son", "ez", "ov", "ini", "berg"],
    &["ian", "ese", "ish", "i"],
    &[],
    &["ix", "on", "ade"],
    &["fest", "cup", "ora"],
    &["storm", "quake", "ane"],
];
const CLASS_TRIGGERS: [&[&str]; 8] = [
    &["in", "near", "from"],
    &["the", "at", "by"],
    &["said", "minister", "president"],
    &["the", "several", "two"],
    &["on", "since", "until"],
    &["the", "titled", "called"],
    &["during", "the", "at"],
    &["after", "hurricane", "the"],
];
const CONNECTORS: [&str; 3] = ["of", "de", "al"];
const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];
const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];
const FILLER_WORDS: [&str; 96] = [
    "the",
    "of",
    "to",
    "and",
    "a",
    "in",
    "is",
    "that",
    "for",
    "on",
    "was",
    "with",
    "said",
    "by",
    "as",
    "at",
    "from",
    "has",
    "have",
    "are",
    "were",
    "it",
    "be",
    "an",
    "they",
    "this",
    "which",
    "will",
    "its",
    "their",
    "after",
    "been",
    "had",
    "also",
    "more",
    "than",
    "over",
    "officials",
    "people",
    "government",
    "police",
    "killed",
    "country",
    "new",
    "military",
    "year",
    "since",
    "two",
    "president",
    "would",
    "against",
    "last",
    "into",
    "about",
    "forces",
    "week",
    "security",
    "talks",
    "minister",
    "attack",
    "told",
    "nuclear",
    "say",
    "troops",
    "percent",
    "could",
    "leaders",
    "reports",
    "many",
    "during",
    "several",
    "under",
    "group",
    "former",
    "some",
    "other",
    "three",
    "million",
    "court",
    "fined",
    "magazine",
    "publisher",
    "city",
    "capital",
    "border",
    "agency",
    "election",
    "party",
    "economic",
    "oil",
    "prices",
    "announced",
    "meeting",
    "region",
    "deal",
    "plan",
];
const SYLLABLES: [&str; 30] = [
    "ka", "ro", "mi", "ta", "len", "dor", "vi", "sa", "nu", "bel", "ar", "zo", "pe", "lu", "gan", "te", "mar", "io",
    "ken", "sha", "ul", "ri", "bo", "fa", "nes", "qu", "di", "val", "or", "hu",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeqGenConfig {
    pub n_train: usize,
    pub n_gold: usize,
    pub n_test: usize,
    /// Distinct surface words per entity class.
    pub class_vocab: usize,
    /// Distinct background words (the built-in list is extended with
    /// generated lowercase words up to this size).
    pub filler_vocab: usize,
    /// Inclusive sentence length range, counting the final period.
    pub length: (usize, usize),
    /// Expected entities per sentence.
    pub density: f64,
    /// Relative weight of entity lengths 1, 2, 3, ...
    pub entity_length_weights: Vec<f64>,
    /// Probability that an entity is preceded by one of its class's cue words.
    pub trigger_prob: f64,
    /// Probability that a sentence opens with an entity.
    pub initial_entity_prob: f64,
    /// Probability that the inner token of a 3-token name is a lowercase
    /// connector ("Bank of X").
    pub connector_prob: f64,
    pub seed: u64,
}

impl Default for SeqGenConfig {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_gold: 60,
            n_test: 400,
            class_vocab: 250,
            filler_vocab: 400,
            length: (12, 32),
            density: 1.8,
            entity_length_weights: vec![0.30, 0.35, 0.25, 0.10],
            trigger_prob: 0.5,
            initial_entity_prob: 0.15,
            connector_prob: 0.6,
            seed: 0,
        }
    }
}

impl SeqGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.length.0 < 2 || self.length.0 > self.length.1 {
            return bad("sentence length range must be non-empty with minimum >= 2");
        }
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return bad("density must be finite and non-negative");
        }
        if self.class_vocab == 0 || self.filler_vocab == 0 {
            return bad("vocabulary sizes must be positive");
        }
        if self.entity_length_weights.is_empty()
            || self.entity_length_weights.iter().any(|w| w.is_nan() || *w < 0.0)
            || self.entity_length_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("entity length weights must be non-negative with a positive sum");
        }
        for p in [self.trigger_prob, self.initial_entity_prob, self.connector_prob] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn mean_entity_length(&self) -> f64 {
        let total: f64 = self.entity_length_weights.iter().sum();
        self.entity_length_weights.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w / total).sum()
    }

    pub fn mean_sentence_length(&self) -> f64 {
        (self.length.0 + self.length.1) as f64 / 2.0
    }
}

/// Train, gold and test splits sharing one tag set.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub tagset: TagSet,
    pub train: Dataset,
    pub gold: Dataset,
    pub test: Dataset,
}

pub fn sequence_tagset() -> TagSet {
    TagSet::from_names(&SEQ_LABELS, 0).expect("static tag set is valid")
}

struct Vocabulary {
    classes: Vec<Vec<String>>,
    fillers: Vec<String>,
    filler_weights: Vec<f64>,
    class_word_weights: Vec<Vec<f64>>,
}

fn pseudo_word(rng: &mut SplitMix64) -> String {
    let syllables = 2 + rng.index(2);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(SYLLABLES[rng.index(SYLLABLES.len())]);
    }
    w
}

fn capitalize(w: &str) -> String {
    let mut chars = w.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn zipf_weights(n: usize) -> Vec<f64> {
    (0..n).map(|r| 1.0 / (r as f64 + 1.0)).collect()
}

impl Vocabulary {
    fn build(cfg: &SeqGenConfig) -> Self {
        let mut rng = SplitMix64::stream(cfg.seed, &[STREAM_VOCAB]);
        let mut used: alloc::collections::BTreeSet<String> = FILLER_WORDS.iter().map(|w| w.to_string()).collect();
        for c in CONNECTORS {
            used.insert(c.to_string());
        }
        let mut classes = Vec::new();
        for (c, suffixes) in CLASS_SUFFIXES.iter().enumerate() {
            let mut words = Vec::with_capacity(cfg.class_vocab);
            if SEQ_LABELS[c + 1] == "TIM" {
                for w in MONTHS.iter().chain(WEEKDAYS.iter()) {
                    words.push(w.to_string());
                }
                let mut year = 1950;
                while words.len() < cfg.class_vocab {
                    words.push(format!("{year}"));
                    year += 1;
                }
                words.truncate(cfg.class_vocab);
            } else {
                while words.len() < cfg.class_vocab {
                    let mut w = pseudo_word(&mut rng);
                    if !suffixes.is_empty() && rng.bernoulli(0.5) {
                        w.push_str(suffixes[rng.index(suffixes.len())]);
                    }
                    let w = capitalize(&w);
                    if used.insert(w.to_lowercase()) {
                        words.push(w);
                    }
                }
            }
            classes.push(words);
        }
        let mut fillers: Vec<String> = FILLER_WORDS.iter().map(|w| w.to_string()).collect();
        fillers.truncate(cfg.filler_vocab);
        while fillers.len() < cfg.filler_vocab {
            let w = pseudo_word(&mut rng);
            if used.insert(w.clone()) {
                fillers.push(w);
            }
        }
        let filler_weights = zipf_weights(fillers.len());
        let class_word_weights = classes.iter().map(|c| zipf_weights(c.len())).collect();
        Self { classes, fillers, filler_weights, class_word_weights }
    }

    fn filler(&self, rng: &mut SplitMix64) -> String {
        self.fillers[rng.weighted(&self.filler_weights)].clone()
    }

    fn entity_word(&self, class: usize, rng: &mut SplitMix64) -> String {
        self.classes[class][rng.weighted(&self.class_word_weights[class])].clone()
    }
}

fn gen_sentence(cfg: &SeqGenConfig, vocab: &Vocabulary, rng: &mut SplitMix64) -> SequenceSample {
    let length = rng.range_inclusive(cfg.length.0, cfg.length.1);
    let mut n_entities = rng.poisson(cfg.density);
    let mut entity_lengths: Vec<usize> =
        (0..n_entities).map(|_| 1 + rng.weighted(&cfg.entity_length_weights)).collect();
    // Entities need a distinct filler after each of them.
    while n_entities > 0 && length < entity_lengths.iter().sum::<usize>() + n_entities {
        entity_lengths.pop();
        n_entities -= 1;
    }
    let entity_tokens: usize = entity_lengths.iter().sum();
    let n_fillers = length - entity_tokens;

    // Entity e is inserted immediately before filler gaps[e]; the last filler
    // is the sentence-final period.
    let mut gaps: Vec<usize> = Vec::with_capacity(n_entities);
    if n_entities > 0 && rng.bernoulli(cfg.initial_entity_prob) {
        gaps.push(0);
    }
    while gaps.len() < n_entities {
        let g = rng.index(n_fillers);
        if !gaps.contains(&g) {
            gaps.push(g);
        }
    }
    gaps.sort_unstable();

    let mut classes = Vec::with_capacity(n_entities);
    for _ in 0..n_entities {
        classes.push(rng.weighted(&CLASS_WEIGHTS));
    }

    let mut tokens = Vec::with_capacity(length);
    let mut labels = Vec::with_capacity(length);
    let mut next_entity = 0;
    for f in 0..n_fillers {
        while next_entity < n_entities && gaps[next_entity] == f {
            let class = classes[next_entity];
            let len = entity_lengths[next_entity];
            for t in 0..len {
                let word = if len == 3 && t == 1 && class != 4 && rng.bernoulli(cfg.connector_prob) {
                    CONNECTORS[rng.index(CONNECTORS.len())].to_string()
                } else {
                    vocab.entity_word(class, rng)
                };
                tokens.push(word);
                labels.push(class + 1);
            }
            next_entity += 1;
        }
        let word = if f + 1 == n_fillers {
            ".".to_string()
        } else if next_entity < n_entities && gaps[next_entity] == f + 1 && rng.bernoulli(cfg.trigger_prob) {
            let triggers = CLASS_TRIGGERS[classes[next_entity]];
            triggers[rng.index(triggers.len())].to_string()
        } else {
            vocab.filler(rng)
        };
        tokens.push(word);
        labels.push(0);
    }
    if labels[0] == 0 {
        tokens[0] = capitalize(&tokens[0]);
    }
    SequenceSample::new(tokens, labels)
}

/// Sentences whose entity tokens come from class vocabularies (capitalized
/// names, plus month/weekday names and years for `TIM`), with lowercase
/// background words and a final period.
pub fn gen_synthetic_sequences(cfg: &SeqGenConfig) -> Result<Splits> {
    cfg.validate()?;
    let vocab = Vocabulary::build(cfg);
    let tagset = sequence_tagset();
    let split = |stream: u64, n: usize, role: Role| {
        let samples = (0..n)
            .map(|i| {
                let mut rng = SplitMix64::stream(cfg.seed, &[stream, i as u64]);
                gen_sentence(cfg, &vocab, &mut rng)
            })
            .collect();
        Dataset::sequences(tagset.clone(), samples, role)
    };
    Ok(Splits {
        train: split(STREAM_TRAIN, cfg.n_train, Role::Clean),
        gold: split(STREAM_GOLD, cfg.n_gold, Role::Gold),
        test: split(STREAM_TEST, cfg.n_test, Role::Test),
        tagset,
    })
}

/// Grid tag set: `other` (background), `road`, `vehicle`.
pub const GRID_LABELS: [&str; 3] = ["other", "road", "vehicle"];
pub const GRID_OTHER: usize = 0;
pub const GRID_ROAD: usize = 1;
pub const GRID_VEHICLE: usize = 2;

pub fn grid_tagset() -> TagSet {
    TagSet::from_names(&GRID_LABELS, GRID_OTHER).expect("static tag set is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridGenConfig {
    pub n_train: usize,
    pub n_gold: usize,
    pub n_test: usize,
    pub height: usize,
    pub width: usize,
    /// Inclusive range of the road band's first row.
    pub road_top: (usize, usize),
    /// Inclusive range of the road band's height.
    pub road_height: (usize, usize),
    pub vehicles: (usize, usize),
    pub vehicle_height: (usize, usize),
    pub vehicle_width: (usize, usize),
    /// Candidate base colors per class; one is chosen per image (per vehicle
    /// for vehicles).
    pub other_colors: Vec<[f64; 3]>,
    pub road_colors: Vec<[f64; 3]>,
    pub vehicle_colors: Vec<[f64; 3]>,
    /// Standard deviation of per-pixel Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for GridGenConfig {
    fn default() -> Self {
        Self {
            n_train: 400,
            n_gold: 60,
            n_test: 400,
            height: 32,
            width: 32,
            road_top: (10, 14),
            road_height: (14, 18),
            vehicles: (2, 4),
            vehicle_height: (5, 9),
            vehicle_width: (6, 12),
            other_colors: vec![[0.45, 0.62, 0.35], [0.55, 0.55, 0.62], [0.62, 0.50, 0.40]],
            road_colors: vec![[0.38, 0.38, 0.40], [0.45, 0.44, 0.44]],
            vehicle_colors: vec![[0.80, 0.15, 0.15], [0.15, 0.25, 0.75], [0.92, 0.90, 0.85], [0.10, 0.10, 0.12]],
            noise: 0.05,
            seed: 0,
        }
    }
}

impl GridGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for (name, r) in [
            ("road_top", self.road_top),
            ("road_height", self.road_height),
            ("vehicles", self.vehicles),
            ("vehicle_height", self.vehicle_height),
            ("vehicle_width", self.vehicle_width),
        ] {
            if r.0 > r.1 {
                return bad(format!("{name} range is empty"));
            }
        }
        if self.height == 0 || self.width == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.road_height.0 == 0 || self.road_top.1 + self.road_height.1 > self.height {
            return bad("road band does not fit the grid".into());
        }
        if self.vehicles.1 > 0 {
            if self.vehicle_height.1 > self.road_height.0 {
                return bad("vehicle taller than the road band".into());
            }
            if self.vehicle_height.0 == 0 || self.vehicle_width.0 == 0 || self.vehicle_width.1 > self.width {
                return bad("vehicle size does not fit the grid".into());
            }
            if self.vehicle_colors.is_empty() {
                return bad("no vehicle colors".into());
            }
        }
        if self.other_colors.is_empty() || self.road_colors.is_empty() {
            return bad("every class needs at least one color".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and non-negative".into());
        }
        Ok(())
    }
}

fn gen_grid(cfg: &GridGenConfig, rng: &mut SplitMix64) -> GridSample {
    let (h, w) = (cfg.height, cfg.width);
    let road_top = rng.range_inclusive(cfg.road_top.0, cfg.road_top.1);
    let road_h = rng.range_inclusive(cfg.road_height.0, cfg.road_height.1);
    let other_color = cfg.other_colors[rng.index(cfg.other_colors.len())];
    let road_color = cfg.road_colors[rng.index(cfg.road_colors.len())];

    let mut labels = vec![GRID_OTHER; h * w];
    let mut base = vec![other_color; h * w];
    for r in road_top..road_top + road_h {
        for c in 0..w {
            labels[r * w + c] = GRID_ROAD;
            base[r * w + c] = road_color;
        }
    }
    let n_vehicles = rng.range_inclusive(cfg.vehicles.0, cfg.vehicles.1);
    for _ in 0..n_vehicles {
        let vh = rng.range_inclusive(cfg.vehicle_height.0, cfg.vehicle_height.1);
        let vw = rng.range_inclusive(cfg.vehicle_width.0, cfg.vehicle_width.1);
        let top = road_top + rng.index(road_h - vh + 1);
        let left = rng.index(w - vw + 1);
        let color = cfg.vehicle_colors[rng.index(cfg.vehicle_colors.len())];
        for r in top..top + vh {
            for c in left..left + vw {
                labels[r * w + c] = GRID_VEHICLE;
                base[r * w + c] = color;
            }
        }
    }
    let pixels = base
        .iter()
        .map(|color| {
            let mut px = [0.0; 3];
            for (ch, v) in px.iter_mut().enumerate() {
                *v = (color[ch] + cfg.noise * rng.normal()).clamp(0.0, 1.0);
            }
            px
        })
        .collect();
    GridSample::new(h, w, pixels, labels)
}

/// Images with a horizontal road band, rectangular vehicles on the road and
/// background elsewhere. Labels are geometrically exact.
pub fn gen_synthetic_grids(cfg: &GridGenConfig) -> Result<Splits> {
    cfg.validate()?;
    let tagset = grid_tagset();
    let split = |stream: u64, n: usize, role: Role| {
        let samples = (0..n)
            .map(|i| {
                let mut rng = SplitMix64::stream(cfg.seed, &[stream, i as u64]);
                gen_grid(cfg, &mut rng)
            })
            .collect();
        Dataset::grids(tagset.clone(), samples, role)
    };
    Ok(Splits {
        train: split(STREAM_TRAIN, cfg.n_train, Role::Clean),
        gold: split(STREAM_GOLD, cfg.n_gold, Role::Gold),
        test: split(STREAM_TEST, cfg.n_test, Role::Test),
        tagset,
    })
}
