//! Element-level F1 and intersection-over-union.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Macro,
    Weighted,
}

/// Per-class counts from element-wise comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub true_positive: Vec<usize>,
    pub false_positive: Vec<usize>,
    pub false_negative: Vec<usize>,
}

impl ClassCounts {
    pub fn new(classes: usize) -> Self {
        Self { true_positive: vec![0; classes], false_positive: vec![0; classes], false_negative: vec![0; classes] }
    }

    pub fn add(&mut self, pred: &[usize], truth: &[usize]) {
        for (&p, &t) in pred.iter().zip(truth) {
            if p == t {
                self.true_positive[t] += 1;
            } else {
                self.false_positive[p] += 1;
                self.false_negative[t] += 1;
            }
        }
    }

    pub fn support(&self, class: usize) -> usize {
        self.true_positive[class] + self.false_negative[class]
    }

    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.true_positive[class] as f64;
        let denom = 2.0 * tp + (self.false_positive[class] + self.false_negative[class]) as f64;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    }

    pub fn iou(&self, class: usize) -> f64 {
        let tp = self.true_positive[class];
        let union = tp + self.false_positive[class] + self.false_negative[class];
        if union == 0 {
            0.0
        } else {
            tp as f64 / union as f64
        }
    }

    fn present(&self, class: usize) -> bool {
        self.true_positive[class] + self.false_positive[class] + self.false_negative[class] > 0
    }

    /// Averages `score` over classes that occur in prediction or truth.
    /// Weighted averaging uses truth support; if no included class has
    /// support the weighted score is 0 (or 1 when no class occurs at all).
    fn average(&self, classes: impl Iterator<Item = usize>, averaging: Averaging, score: impl Fn(usize) -> f64) -> f64 {
        let present: Vec<usize> = classes.filter(|&c| self.present(c)).collect();
        if present.is_empty() {
            return 1.0;
        }
        match averaging {
            Averaging::Macro => present.iter().map(|&c| score(c)).sum::<f64>() / present.len() as f64,
            Averaging::Weighted => {
                let total: usize = present.iter().map(|&c| self.support(c)).sum();
                if total == 0 {
                    return 0.0;
                }
                present.iter().map(|&c| score(c) * self.support(c) as f64).sum::<f64>() / total as f64
            }
        }
    }
}

pub fn class_counts(pred: &Dataset, truth: &Dataset) -> Result<ClassCounts> {
    if pred.tagset != truth.tagset {
        return Err(Error::TagSetMismatch);
    }
    truth.check_same_shape(pred)?;
    let k = truth.tagset.len();
    let mut counts = ClassCounts::new(k);
    for i in 0..truth.len() {
        let (p, t) = (pred.labels_of(i), truth.labels_of(i));
        if let Some(&bad) = p.iter().chain(t).find(|&&l| l >= k) {
            return Err(Error::IndexOutOfRange { index: bad, len: k });
        }
        counts.add(p, t);
    }
    Ok(counts)
}

/// Element-level F1 averaged over classes. The background class is left
/// out unless `include_background` is set.
pub fn f1_score(pred: &Dataset, truth: &Dataset, averaging: Averaging, include_background: bool) -> Result<f64> {
    let counts = class_counts(pred, truth)?;
    let bg = truth.tagset.background();
    let classes = (0..truth.tagset.len()).filter(|&c| include_background || c != bg);
    Ok(counts.average(classes, averaging, |c| counts.f1(c)))
}

/// F1 of one class.
pub fn class_f1(pred: &Dataset, truth: &Dataset, class: usize) -> Result<f64> {
    let counts = class_counts(pred, truth)?;
    if class >= counts.true_positive.len() {
        return Err(Error::IndexOutOfRange { index: class, len: counts.true_positive.len() });
    }
    Ok(counts.f1(class))
}

/// Pixel IoU averaged over every class present in prediction or truth.
pub fn iou_score(pred: &Dataset, truth: &Dataset, averaging: Averaging) -> Result<f64> {
    let counts = class_counts(pred, truth)?;
    Ok(counts.average(0..truth.tagset.len(), averaging, |c| counts.iou(c)))
}
