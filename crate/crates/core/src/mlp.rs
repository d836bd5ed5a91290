//! Small fully connected network: ReLU hidden layers, softmax output,
//! mean cross-entropy loss with optional L1/L2 weight penalties.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{sign, softmax};
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *slot = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Gradient with the layout of [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new(input: usize, hidden: &[usize], output: usize, seed: u64, stream: u64) -> Self {
        let mut rng = SplitMix64::stream(seed, &[stream]);
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (inputs, outputs) = (pair[0], pair[1]);
                let limit = libm::sqrt(6.0 / inputs.max(1) as f64);
                let weights = (0..inputs * outputs).map(|_| (2.0 * rng.next_f64() - 1.0) * limit).collect();
                Dense { inputs, outputs, weights, bias: vec![0.0; outputs] }
            })
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut act = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.outputs];
            layer.forward(&act, &mut next);
            if i + 1 < self.layers.len() {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            act = next;
        }
        softmax(&mut act);
        act
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in self.layers.iter_mut() {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }

    fn penalty(&self, l1: f64, l2: f64) -> f64 {
        self.layers.iter().flat_map(|l| &l.weights).map(|&w| l1 * libm::fabs(w) + l2 * w * w).sum()
    }

    /// Mean cross-entropy over the batch plus `l1*|W|_1 + l2*|W|^2` (biases
    /// unpenalized), and its gradient. `inputs` is `targets.len()` rows of
    /// `input_size()` values.
    pub fn loss_grad(&self, inputs: &[f64], targets: &[usize], l1: f64, l2: f64) -> Result<(f64, MlpGradient)> {
        let n_in = self.input_size();
        if inputs.len() != targets.len() * n_in {
            return Err(Error::LengthMismatch {
                what: "batch inputs",
                expected: targets.len() * n_in,
                found: inputs.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let k = self.output_size();
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::IndexOutOfRange { index: bad, len: k });
        }
        let mut grad = MlpGradient {
            layers: self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.outputs])).collect(),
        };
        let scale = 1.0 / targets.len() as f64;
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        let mut deltas: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        for (row, &target) in inputs.chunks_exact(n_in).zip(targets) {
            for i in 0..self.layers.len() {
                let (before, rest) = acts.split_at_mut(i);
                let input = if i == 0 { row } else { &before[i - 1][..] };
                self.layers[i].forward(input, &mut rest[0]);
                if i + 1 < self.layers.len() {
                    for v in rest[0].iter_mut() {
                        *v = v.max(0.0);
                    }
                }
            }
            let out = acts.last_mut().expect("at least one layer");
            softmax(out);
            loss -= libm::log(out[target].max(f64::MIN_POSITIVE)) * scale;

            let last = self.layers.len() - 1;
            for (d, &p) in deltas[last].iter_mut().zip(out.iter()) {
                *d = p * scale;
            }
            deltas[last][target] -= scale;
            for i in (0..self.layers.len()).rev() {
                let input: &[f64] = if i == 0 { row } else { &acts[i - 1] };
                let layer = &self.layers[i];
                let (gw, gb) = &mut grad.layers[i];
                for o in 0..layer.outputs {
                    let d = deltas[i][o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let g_row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &x) in g_row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
                if i > 0 {
                    let (lower, upper) = deltas.split_at_mut(i);
                    let prev = &mut lower[i - 1];
                    prev.fill(0.0);
                    for (o, &d) in upper[0].iter().enumerate().take(layer.outputs) {
                        if d == 0.0 {
                            continue;
                        }
                        let w_row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (p, &w) in prev.iter_mut().zip(w_row) {
                            *p += d * w;
                        }
                    }
                    for (p, &a) in prev.iter_mut().zip(&acts[i - 1]) {
                        if a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }
        for (layer, (gw, _)) in self.layers.iter().zip(grad.layers.iter_mut()) {
            for (g, &w) in gw.iter_mut().zip(&layer.weights) {
                *g += l1 * sign(w) + 2.0 * l2 * w;
            }
        }
        Ok((loss + self.penalty(l1, l2), grad))
    }

    /// Gradient step `params -= lr * grad`.
    pub fn descend(&mut self, grad: &MlpGradient, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|w| w.is_finite()))
    }
}

impl MlpGradient {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b).copied()).collect()
    }
}
