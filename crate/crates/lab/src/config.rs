//! Experiment and sweep descriptions (one JSON document each).

use std::path::{Path, PathBuf};

use ecn_core::baselines::Strategy;
use ecn_core::corruption::{CorruptionKind, CorruptionSpec};
use ecn_core::ecn::{PipelineConfig, RelevantSubsetSpec, RsVariant};
use ecn_core::features::FEATURE_COUNT;
use ecn_core::synth::{GridGenConfig, SeqGenConfig};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::io::read_text;

/// A config file that cannot be read is a config error.
fn read_config(path: &Path) -> Result<String> {
    read_text(path).map_err(|e| config_err(e.to_string()))
}

/// Where the train, gold and test splits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated per seed (the generator seed is the run seed).
    SyntheticSequences(SeqGenConfig),
    SyntheticGrids(GridGenConfig),
    /// Pre-split CoNLL files. With a corruption, `train` is treated as
    /// clean and corrupted per seed; without one it is used as the
    /// corrupted corpus and `clean` is optional.
    Conll {
        train: PathBuf,
        gold: PathBuf,
        test: PathBuf,
        #[serde(default)]
        clean: Option<PathBuf>,
        #[serde(default)]
        tagset: Option<PathBuf>,
        #[serde(default)]
        strip_bio: bool,
    },
    /// One CoNLL corpus, shuffled with `split_seed` and cut into
    /// consecutive train / gold / test blocks.
    ConllCorpus {
        path: PathBuf,
        n_train: usize,
        n_gold: usize,
        n_test: usize,
        #[serde(default)]
        tagset: Option<PathBuf>,
        #[serde(default)]
        strip_bio: bool,
        #[serde(default)]
        split_seed: u64,
    },
    /// Pre-split `.grid` files.
    Grid {
        train: PathBuf,
        gold: PathBuf,
        test: PathBuf,
        #[serde(default)]
        clean: Option<PathBuf>,
        tagset: PathBuf,
    },
}

impl DataSource {
    pub fn is_sequence(&self) -> bool {
        !matches!(self, DataSource::SyntheticGrids(_) | DataSource::Grid { .. })
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            DataSource::SyntheticSequences(_) | DataSource::SyntheticGrids(_) => Vec::new(),
            DataSource::Conll { train, gold, test, clean, tagset, .. } => {
                let mut v = vec![train, gold, test];
                v.extend(clean.as_mut());
                v.extend(tagset.as_mut());
                v
            }
            DataSource::ConllCorpus { path, tagset, .. } => {
                let mut v = vec![path];
                v.extend(tagset.as_mut());
                v
            }
            DataSource::Grid { train, gold, test, clean, tagset } => {
                let mut v = vec![train, gold, test, tagset];
                v.extend(clean.as_mut());
                v
            }
        }
    }

    fn has_clean(&self, corrupted_here: bool) -> bool {
        match self {
            DataSource::SyntheticSequences(_) | DataSource::SyntheticGrids(_) | DataSource::ConllCorpus { .. } => true,
            DataSource::Conll { clean, .. } | DataSource::Grid { clean, .. } => corrupted_here || clean.is_some(),
        }
    }
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    /// Applied to the training split with the run seed. `None` uses the
    /// training split as given.
    #[serde(default)]
    pub corruption: Option<CorruptionKind>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    /// RS settings shared by the ECN strategies (each overrides `variant`).
    #[serde(default)]
    pub rs: RelevantSubsetSpec,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(format!("experiment config: {e}")))
    }

    /// Reads a config; relative data paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_config(path)?)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.data.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("name must be non-empty and contain no path separators"));
        }
        if self.strategies.is_empty() {
            return Err(config_err("at least one strategy is required"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(config_err(format!("strategy {} listed twice", s.as_str())));
            }
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(config_err(format!("seed {s} listed twice")));
            }
        }
        let sequence = self.data.is_sequence();
        match &self.data {
            DataSource::SyntheticSequences(c) => c.validate().map_err(|e| config_err(e.to_string()))?,
            DataSource::SyntheticGrids(c) => c.validate().map_err(|e| config_err(e.to_string()))?,
            DataSource::ConllCorpus { n_train, n_test, .. } if *n_train == 0 || *n_test == 0 => {
                return Err(config_err("conll_corpus needs n_train and n_test > 0"));
            }
            _ => {}
        }
        if let Some(kind) = &self.corruption {
            CorruptionSpec::new(kind.clone(), 0).validate().map_err(|e| config_err(e.to_string()))?;
            let for_sequences = matches!(
                kind,
                CorruptionKind::Imprecise { .. }
                    | CorruptionKind::MissingRandom { .. }
                    | CorruptionKind::MissingSystematic
            );
            if for_sequences != sequence {
                return Err(config_err(format!(
                    "corruption {} does not apply to {} data",
                    CorruptionSpec::new(kind.clone(), 0).kind_name(),
                    if sequence { "sequence" } else { "grid" }
                )));
            }
        }
        if self.strategies.contains(&Strategy::Clean) && !self.data.has_clean(self.corruption.is_some()) {
            return Err(config_err("strategy clean needs clean data: add a corruption or a clean path"));
        }
        self.rs.validate().map_err(|e| config_err(e.to_string()))?;
        self.pipeline.base.crf.validate().map_err(|e| config_err(format!("base crf: {e}")))?;
        self.pipeline.base.patch.train.validate().map_err(|e| config_err(format!("base patch: {e}")))?;
        if self.pipeline.base.patch.window == 0 {
            return Err(config_err("base patch window must be positive"));
        }
        self.pipeline.ecn.validate().map_err(|e| config_err(format!("ecn: {e}")))?;
        let mut data = self.data.clone();
        for p in data.paths_mut() {
            if !p.exists() {
                return Err(config_err(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Pipeline config for one run seed.
    pub fn pipeline_for(&self, seed: u64) -> PipelineConfig {
        self.pipeline.with_seed(seed)
    }

    pub fn rs_for(&self, seed: u64) -> RelevantSubsetSpec {
        RelevantSubsetSpec { fill_seed: seed, ..self.rs.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NeighborRadiusK,
    NTokenFeatures,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NeighborRadiusK => "neighbor_radius_k",
            SweepAxis::NTokenFeatures => "n_token_features",
        }
    }

    /// y_only for neighbour labels, x_only for token features.
    pub fn default_variant(self) -> RsVariant {
        match self {
            SweepAxis::NeighborRadiusK => RsVariant::YOnly,
            SweepAxis::NTokenFeatures => RsVariant::XOnly,
        }
    }

    pub fn apply(self, rs: &RelevantSubsetSpec, value: usize) -> RelevantSubsetSpec {
        let mut out = rs.clone();
        match self {
            SweepAxis::NeighborRadiusK => out.radius = value,
            SweepAxis::NTokenFeatures => out.n_token_features = value,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    /// Data, corruption, training settings, seeds and output directory; its
    /// strategy list is ignored.
    pub base: ExperimentConfig,
    /// Score this class's F1 (or IoU) instead of the weighted average.
    #[serde(default)]
    pub focus_class: Option<String>,
    #[serde(default)]
    pub variant: Option<RsVariant>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(format!("sweep config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_config(path)?)?;
        cfg.base.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn variant(&self) -> RsVariant {
        self.variant.unwrap_or(self.axis.default_variant())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("name must be non-empty and contain no path separators"));
        }
        if self.values.is_empty() {
            return Err(config_err("sweep needs at least one value"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("sweep values must be strictly ascending"));
        }
        if self.axis == SweepAxis::NTokenFeatures && self.values.iter().any(|&v| v > FEATURE_COUNT) {
            return Err(config_err(format!("n_token_features values must be at most {FEATURE_COUNT}")));
        }
        if !self.base.data.is_sequence() {
            return Err(config_err("sweeps run on sequence data"));
        }
        let base =
            ExperimentConfig { strategies: vec![Strategy::CorruptedOnly, Strategy::GoldOnly], ..self.base.clone() };
        base.validate()
    }
}

/// Either kind of config document.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyConfig {
    Experiment(ExperimentConfig),
    Sweep(SweepConfig),
}

impl AnyConfig {
    /// A document with an `axis` key is a sweep.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err(format!("config: {e}")))?;
        if v.get("axis").is_some() {
            SweepConfig::from_json(text).map(AnyConfig::Sweep)
        } else {
            ExperimentConfig::from_json(text).map(AnyConfig::Experiment)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_config(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        match &mut cfg {
            AnyConfig::Experiment(c) => c.resolve_paths(base),
            AnyConfig::Sweep(s) => s.base.resolve_paths(base),
        }
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        match self {
            AnyConfig::Experiment(c) => &c.name,
            AnyConfig::Sweep(s) => &s.name,
        }
    }

    /// The experiment settings (a sweep's base).
    pub fn experiment(&self) -> &ExperimentConfig {
        match self {
            AnyConfig::Experiment(c) => c,
            AnyConfig::Sweep(s) => &s.base,
        }
    }

    pub fn experiment_mut(&mut self) -> &mut ExperimentConfig {
        match self {
            AnyConfig::Experiment(c) => c,
            AnyConfig::Sweep(s) => &mut s.base,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            AnyConfig::Experiment(c) => c.to_json(),
            AnyConfig::Sweep(s) => s.to_json(),
        }
    }
}
