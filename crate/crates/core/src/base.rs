//! The base model `f`: a CRF for sequences, a patch classifier for grids.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crf::{crf_features, crf_forward, crf_train, CrfModel};
use crate::data::{Dataset, TagSet};
use crate::math::argmax;
use crate::metrics::{class_counts, Averaging};
use crate::optim::TrainConfig;
use crate::patch::{patch_predict, patch_train, PatchClassifier, PatchConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseConfig {
    pub crf: TrainConfig,
    pub patch: PatchConfig,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            crf: TrainConfig { steps: 4000, learning_rate: 1.0, ..TrainConfig::default() },
            patch: PatchConfig::default(),
        }
    }
}

impl BaseConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.crf.seed = seed;
        out.patch.train.seed = seed;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BaseModel {
    Crf(CrfModel),
    Patch(PatchClassifier),
}

/// Hard labels (Viterbi for sequences, argmax for grids) and per-element
/// distributions (marginals for sequences).
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<Vec<usize>>,
    pub soft: Vec<Vec<Vec<f64>>>,
}

pub fn train_base(train: &Dataset, cfg: &BaseConfig) -> Result<BaseModel> {
    if train.is_sequence() {
        crf_train(train, &cfg.crf).map(BaseModel::Crf)
    } else {
        patch_train(train, &cfg.patch).map(BaseModel::Patch)
    }
}

impl BaseModel {
    pub fn tagset(&self) -> &TagSet {
        match self {
            BaseModel::Crf(m) => m.tagset(),
            BaseModel::Patch(m) => &m.tagset,
        }
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self, BaseModel::Crf(_))
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if &ds.tagset != self.tagset() {
            return Err(Error::TagSetMismatch);
        }
        if ds.is_sequence() != self.is_sequence() {
            return Err(Error::WrongKind { expected: if self.is_sequence() { "sequence" } else { "grid" } });
        }
        Ok(())
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Predictions> {
        self.check(ds)?;
        let mut labels = Vec::with_capacity(ds.len());
        let mut soft = Vec::with_capacity(ds.len());
        match self {
            BaseModel::Crf(m) => {
                for s in ds.as_sequences()? {
                    let feats = crf_features(s);
                    let pot = m.potentials(&m.encode(&feats))?;
                    labels.push(pot.viterbi());
                    soft.push(crf_forward(m, &feats)?.marginals);
                }
            }
            BaseModel::Patch(m) => {
                for g in ds.as_grids()? {
                    let rows = patch_predict(m, g)?;
                    labels.push(rows.iter().map(|p| argmax(p)).collect());
                    soft.push(rows);
                }
            }
        }
        Ok(Predictions { labels, soft })
    }

    pub fn predict_labels(&self, ds: &Dataset) -> Result<Vec<Vec<usize>>> {
        self.check(ds)?;
        match self {
            BaseModel::Crf(m) => crate::crf::crf_predict(m, ds),
            BaseModel::Patch(m) => crate::patch::patch_predict_labels(m, ds),
        }
    }
}

/// Weighted and macro scores plus per-class scores of one prediction.
/// F1 (background excluded) for sequences, IoU for grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub weighted: f64,
    pub macro_avg: f64,
    pub per_class: Vec<f64>,
    pub iou: bool,
}

impl Evaluation {
    pub fn metric_names(&self) -> [&'static str; 2] {
        if self.iou {
            ["weighted_iou", "macro_iou"]
        } else {
            ["weighted_f1", "macro_f1"]
        }
    }
}

pub fn evaluate_labels(pred: &Dataset, truth: &Dataset) -> Result<Evaluation> {
    let iou = !truth.is_sequence();
    let counts = class_counts(pred, truth)?;
    let k = truth.tagset.len();
    let per_class = (0..k).map(|c| if iou { counts.iou(c) } else { counts.f1(c) }).collect();
    let score = |avg| {
        if iou {
            crate::metrics::iou_score(pred, truth, avg)
        } else {
            crate::metrics::f1_score(pred, truth, avg, false)
        }
    };
    Ok(Evaluation { weighted: score(Averaging::Weighted)?, macro_avg: score(Averaging::Macro)?, per_class, iou })
}

/// Scores `model` on `test`.
pub fn evaluate(model: &BaseModel, test: &Dataset) -> Result<Evaluation> {
    let labels = model.predict_labels(test)?;
    let pred = test.with_labels(labels, test.role)?;
    evaluate_labels(&pred, test)
}
