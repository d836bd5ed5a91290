//! Named configs. `*-desk` presets run on synthetic data; the others expect
//! a real corpus on disk.

use std::path::PathBuf;

use ecn_core::baselines::Strategy;
use ecn_core::corruption::{CorruptionKind, ImpreciseMode};
use ecn_core::ecn::{PipelineConfig, RelevantSubsetSpec};
use ecn_core::features::FEATURE_COUNT;
use ecn_core::optim::{Method, TrainConfig};
use ecn_core::synth::{GridGenConfig, SeqGenConfig, GRID_ROAD, GRID_VEHICLE};

use crate::config::{AnyConfig, DataSource, ExperimentConfig, SweepAxis, SweepConfig};
use crate::error::{LabError, Result};

/// Environment variable pointing at a CoNLL copy of the GMB corpus.
pub const GMB_CORPUS_ENV: &str = "ECN_GMB_CORPUS";
/// Environment variable pointing at a directory with `train.grid`,
/// `gold.grid`, `test.grid` and `tagset.txt`.
pub const GRID_DIR_ENV: &str = "ECN_CITYSCAPES_DIR";

pub const DESK_SEEDS: [u64; 3] = [0, 1, 2];

pub const EXPERIMENTS: [&str; 18] = [
    "gmb-im-fixed-desk",
    "gmb-im-r-desk",
    "gmb-im-v-desk",
    "gmb-im-rv-desk",
    "gmb-mi-rand-desk",
    "gmb-mi-syst-desk",
    "grid-mis-50-desk",
    "grid-mis-75-desk",
    "grid-coarsen-desk",
    "gmb-im-fixed",
    "gmb-im-r",
    "gmb-im-v",
    "gmb-im-rv",
    "gmb-mi-rand",
    "gmb-mi-syst",
    "cityscapes-mis-50",
    "cityscapes-mis-75",
    "cityscapes-coarsen",
];

pub const SWEEPS: [&str; 2] = ["sweep-k-desk", "sweep-features-desk"];

pub fn names() -> impl Iterator<Item = &'static str> {
    EXPERIMENTS.into_iter().chain(SWEEPS)
}

fn imprecise(mode: ImpreciseMode) -> CorruptionKind {
    CorruptionKind::Imprecise { mode }
}

fn sequence_corruption(code: &str) -> Option<CorruptionKind> {
    Some(match code {
        "im-fixed" => imprecise(ImpreciseMode::Fixed),
        "im-r" => imprecise(ImpreciseMode::RandomHalf),
        "im-v" => imprecise(ImpreciseMode::Variable),
        "im-rv" => imprecise(ImpreciseMode::RandomVariable),
        "mi-rand" => CorruptionKind::MissingRandom { drop_rate: 0.3 },
        "mi-syst" => CorruptionKind::MissingSystematic,
        _ => return None,
    })
}

fn grid_corruption(code: &str) -> Option<CorruptionKind> {
    let mis = |fraction| CorruptionKind::GridMisclassify { fraction, from_label: GRID_VEHICLE, to_label: GRID_ROAD };
    Some(match code {
        "mis-50" => mis(0.5),
        "mis-75" => mis(0.75),
        "coarsen" => CorruptionKind::GridCoarsen { erode_px: 2 },
        _ => return None,
    })
}

/// Grid corrector settings: the dense MLP corrector wants a smaller step
/// and no L1.
fn grid_pipeline() -> PipelineConfig {
    let mut p = PipelineConfig::default();
    p.ecn.train = TrainConfig {
        steps: 1500,
        batch_size: 1,
        learning_rate: 0.05,
        l1: 0.0,
        l2: 1e-4,
        method: Method::Adagrad,
        ..p.ecn.train
    };
    p
}

fn experiment(name: &str, data: DataSource, corruption: CorruptionKind, seeds: Vec<u64>) -> ExperimentConfig {
    let sequence = data.is_sequence();
    ExperimentConfig {
        name: name.into(),
        data,
        corruption: Some(corruption),
        strategies: Strategy::ALL.to_vec(),
        rs: RelevantSubsetSpec::default(),
        pipeline: if sequence { PipelineConfig::default() } else { grid_pipeline() },
        seeds,
        out_dir: PathBuf::from("runs"),
    }
}

fn env_path(var: &str, fallback: &str) -> PathBuf {
    std::env::var_os(var).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(fallback))
}

fn experiment_preset(name: &str) -> Option<ExperimentConfig> {
    if let Some(code) = name.strip_prefix("gmb-").and_then(|r| r.strip_suffix("-desk")) {
        let data = DataSource::SyntheticSequences(SeqGenConfig::default());
        return Some(experiment(name, data, sequence_corruption(code)?, DESK_SEEDS.to_vec()));
    }
    if let Some(code) = name.strip_prefix("grid-").and_then(|r| r.strip_suffix("-desk")) {
        let data = DataSource::SyntheticGrids(GridGenConfig::default());
        return Some(experiment(name, data, grid_corruption(code)?, DESK_SEEDS.to_vec()));
    }
    if let Some(code) = name.strip_prefix("gmb-") {
        let data = DataSource::ConllCorpus {
            path: env_path(GMB_CORPUS_ENV, "data/gmb.conll"),
            n_train: 37407,
            n_gold: 960,
            n_test: 9592,
            tagset: None,
            strip_bio: true,
            split_seed: 0,
        };
        return Some(experiment(name, data, sequence_corruption(code)?, vec![0]));
    }
    if let Some(code) = name.strip_prefix("cityscapes-") {
        let dir = env_path(GRID_DIR_ENV, "data/cityscapes");
        let data = DataSource::Grid {
            train: dir.join("train.grid"),
            gold: dir.join("gold.grid"),
            test: dir.join("test.grid"),
            clean: None,
            tagset: dir.join("tagset.txt"),
        };
        let mut cfg = experiment(name, data, grid_corruption(code)?, vec![0]);
        cfg.rs.window = 64;
        cfg.pipeline.base.patch.window = 64;
        return Some(cfg);
    }
    None
}

fn sweep_preset(name: &str) -> Option<SweepConfig> {
    let (axis, values) = match name {
        "sweep-k-desk" => (SweepAxis::NeighborRadiusK, vec![0, 1, 2, 3, 5, 8]),
        "sweep-features-desk" => (SweepAxis::NTokenFeatures, vec![0, 1, 4, 7, 10, 13, 16, FEATURE_COUNT]),
        _ => return None,
    };
    let mut base = experiment_preset("gmb-im-fixed-desk")?;
    base.name = name.into();
    base.strategies = vec![Strategy::CorruptedOnly, Strategy::GoldOnly];
    Some(SweepConfig { name: name.into(), axis, values, base, focus_class: Some("GEO".into()), variant: None })
}

pub fn preset(name: &str) -> Result<AnyConfig> {
    if let Some(c) = experiment_preset(name) {
        return Ok(AnyConfig::Experiment(c));
    }
    if let Some(s) = sweep_preset(name) {
        return Ok(AnyConfig::Sweep(s));
    }
    let known: Vec<&str> = names().collect();
    Err(LabError::Config(format!("unknown preset {name:?}; known presets: {}", known.join(", "))))
}
