//! Minibatch training settings shared by the base models and the corrector.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Steps, batch size, learning rate, L1/L2 coefficients and seed for
/// minibatch gradient descent. With `tail_average` the returned parameters
/// are the mean iterate over the second half of the steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
    pub tail_average: bool,
    pub method: Method,
}

/// Update rule. `Adagrad` divides each coordinate's step by the root of
/// its accumulated squared gradients, so rarely active weights still move.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Sgd,
    Adagrad,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 16,
            learning_rate: 0.5,
            l1: 0.1,
            l2: 0.1,
            seed: 0,
            tail_average: true,
            method: Method::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("steps and batch size must be at least 1".into()));
        }
        if !(self.l1 >= 0.0 && self.l2 >= 0.0) {
            return Err(Error::InvalidParameter("regularization coefficients must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Applies `cfg.method` updates to a parameter vector.
pub struct Stepper {
    learning_rate: f64,
    accum: Option<Vec<f64>>,
}

impl Stepper {
    pub fn new(cfg: &TrainConfig, params: usize) -> Self {
        let accum = (cfg.method == Method::Adagrad).then(|| alloc::vec![0.0; params]);
        Self { learning_rate: cfg.learning_rate, accum }
    }

    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        match &mut self.accum {
            None => params.iter_mut().zip(grad).for_each(|(w, g)| *w -= self.learning_rate * g),
            Some(acc) => {
                for ((w, g), a) in params.iter_mut().zip(grad).zip(acc.iter_mut()) {
                    *a += g * g;
                    if *a > 0.0 {
                        *w -= self.learning_rate * g / libm::sqrt(*a);
                    }
                }
            }
        }
    }
}

/// Running mean of the parameters over the second half of training.
pub struct TailAverage {
    start: usize,
    count: usize,
    sum: Vec<f64>,
}

impl TailAverage {
    /// `None` when averaging is disabled.
    pub fn new(cfg: &TrainConfig, params: usize) -> Option<Self> {
        cfg.tail_average.then(|| Self { start: cfg.steps / 2, count: 0, sum: alloc::vec![0.0; params] })
    }

    /// Records the parameters after update `step`.
    pub fn observe<'a>(&mut self, step: usize, params: impl IntoIterator<Item = &'a f64>) {
        if step < self.start {
            return;
        }
        self.count += 1;
        for (s, p) in self.sum.iter_mut().zip(params) {
            *s += p;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

/// Draws batches by walking seeded permutations of `0..n`, reshuffling at
/// every pass.
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: SplitMix64,
}

impl BatchSampler {
    pub fn new(n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = SplitMix64::stream(seed, &[stream]);
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        Self { order, pos: 0, rng }
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size && !self.order.is_empty() {
            if self.pos == self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}
