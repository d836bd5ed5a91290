//! Linear-chain conditional random field.
//!
//! A token's features become weighted attributes: a string feature
//! `name=value` is an indicator attribute, a numeric feature `name` carries
//! its value (zero values are dropped), and every token also fires `bias`.
//! Each attribute has one weight per label; label-to-label transitions have
//! a `K x K` weight matrix. Attributes not seen in training are ignored at
//! inference time.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{ensure_valid, Dataset, FeatureMap, FeatureValue, SequenceSample, TagSet};
use crate::features::FeatureExtractor;
use crate::math::{argmax, log_sum_exp, sign};
use crate::optim::{BatchSampler, TailAverage, TrainConfig};
use crate::{Error, Result};

pub const BIAS_ATTRIBUTE: &str = "bias";
/// Prefix for extra per-token features carried by a sample.
pub const EXTRA_PREFIX: &str = "x:";
const STREAM_CRF_BATCHES: u64 = 0x31;

/// Standard features of every token merged with the sample's own extra
/// features (prefixed with `x:`).
pub fn crf_features(sample: &SequenceSample) -> Vec<FeatureMap> {
    let mut maps = FeatureExtractor::standard().extract_tokens(&sample.tokens);
    for (map, extra) in maps.iter_mut().zip(&sample.features) {
        for (k, v) in extra {
            map.insert(format!("{EXTRA_PREFIX}{k}"), v.clone());
        }
    }
    maps
}

/// Weighted attributes of one token, `bias` first.
pub fn token_attributes(features: &FeatureMap) -> Vec<(String, f64)> {
    let mut out = Vec::with_capacity(features.len() + 1);
    out.push((BIAS_ATTRIBUTE.to_string(), 1.0));
    for (name, value) in features {
        match value {
            FeatureValue::Str(s) => out.push((format!("{name}={s}"), 1.0)),
            FeatureValue::Num(x) if *x != 0.0 => out.push((name.clone(), *x)),
            FeatureValue::Num(_) => {}
        }
    }
    out
}

/// Per-position label scores plus transition scores of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub len: usize,
    pub labels: usize,
    /// `len x labels`, row-major.
    pub unary: Vec<f64>,
    /// `labels x labels`, `[prev * labels + next]`.
    pub transitions: Vec<f64>,
}

/// Output of forward-backward.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    pub log_z: f64,
    /// Per-position label marginals.
    pub marginals: Vec<Vec<f64>>,
    /// For each edge `(j, j+1)`, a `K x K` matrix `[prev * K + next]`.
    pub pairwise: Vec<Vec<f64>>,
}

impl Potentials {
    pub fn new(len: usize, labels: usize, unary: Vec<f64>, transitions: Vec<f64>) -> Result<Self> {
        if unary.len() != len * labels {
            return Err(Error::LengthMismatch { what: "unary potentials", expected: len * labels, found: unary.len() });
        }
        if transitions.len() != labels * labels {
            return Err(Error::LengthMismatch {
                what: "transition potentials",
                expected: labels * labels,
                found: transitions.len(),
            });
        }
        if len == 0 {
            return Err(Error::Empty("sequence"));
        }
        if unary.iter().chain(&transitions).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("potentials"));
        }
        Ok(Self { len, labels, unary, transitions })
    }

    #[inline]
    fn u(&self, j: usize, l: usize) -> f64 {
        self.unary[j * self.labels + l]
    }

    #[inline]
    fn t(&self, p: usize, n: usize) -> f64 {
        self.transitions[p * self.labels + n]
    }

    /// Unnormalized log-score of a complete labeling.
    pub fn score(&self, labels: &[usize]) -> f64 {
        let mut s = 0.0;
        for (j, &l) in labels.iter().enumerate() {
            s += self.u(j, l);
            if j > 0 {
                s += self.t(labels[j - 1], l);
            }
        }
        s
    }

    /// Forward-backward with per-position rescaling in probability space;
    /// falls back to log space if a scale factor under- or overflows.
    pub fn forward_backward(&self) -> ForwardResult {
        self.forward_backward_scaled().unwrap_or_else(|| self.forward_backward_log())
    }

    fn forward_backward_scaled(&self) -> Option<ForwardResult> {
        let (d, k) = (self.len, self.labels);
        let t_max = self.transitions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let trans: Vec<f64> = self.transitions.iter().map(|&t| libm::exp(t - t_max)).collect();
        let mut u_max = vec![0.0; d];
        let mut unary = vec![0.0; d * k];
        for j in 0..d {
            let row = &self.unary[j * k..(j + 1) * k];
            u_max[j] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (e, &u) in unary[j * k..(j + 1) * k].iter_mut().zip(row) {
                *e = libm::exp(u - u_max[j]);
            }
        }
        let mut alpha = vec![0.0; d * k];
        let mut scale = vec![0.0; d];
        alpha[..k].copy_from_slice(&unary[..k]);
        for j in 0..d {
            if j > 0 {
                for l in 0..k {
                    let mut acc = 0.0;
                    for p in 0..k {
                        acc += alpha[(j - 1) * k + p] * trans[p * k + l];
                    }
                    alpha[j * k + l] = unary[j * k + l] * acc;
                }
            }
            let c: f64 = alpha[j * k..(j + 1) * k].iter().sum();
            if !(c > 0.0 && c.is_finite()) {
                return None;
            }
            scale[j] = c;
            alpha[j * k..(j + 1) * k].iter_mut().for_each(|a| *a /= c);
        }
        let mut beta = vec![1.0; d * k];
        for j in (0..d - 1).rev() {
            for p in 0..k {
                let mut acc = 0.0;
                for n in 0..k {
                    acc += trans[p * k + n] * unary[(j + 1) * k + n] * beta[(j + 1) * k + n];
                }
                beta[j * k + p] = acc / scale[j + 1];
            }
        }
        let log_z =
            scale.iter().map(|&c| libm::log(c)).sum::<f64>() + u_max.iter().sum::<f64>() + (d - 1) as f64 * t_max;
        let marginals = (0..d).map(|j| (0..k).map(|l| alpha[j * k + l] * beta[j * k + l]).collect()).collect();
        let pairwise = (0..d - 1)
            .map(|j| {
                let mut m = vec![0.0; k * k];
                for p in 0..k {
                    for n in 0..k {
                        m[p * k + n] =
                            alpha[j * k + p] * trans[p * k + n] * unary[(j + 1) * k + n] * beta[(j + 1) * k + n]
                                / scale[j + 1];
                    }
                }
                m
            })
            .collect();
        Some(ForwardResult { log_z, marginals, pairwise })
    }

    fn forward_backward_log(&self) -> ForwardResult {
        let (d, k) = (self.len, self.labels);
        let mut alpha = vec![0.0; d * k];
        let mut beta = vec![0.0; d * k];
        let mut scratch = vec![0.0; k];
        alpha[..k].copy_from_slice(&self.unary[..k]);
        for j in 1..d {
            for l in 0..k {
                for p in 0..k {
                    scratch[p] = alpha[(j - 1) * k + p] + self.t(p, l);
                }
                alpha[j * k + l] = self.u(j, l) + log_sum_exp(&scratch);
            }
        }
        for j in (0..d - 1).rev() {
            for p in 0..k {
                for n in 0..k {
                    scratch[n] = self.t(p, n) + self.u(j + 1, n) + beta[(j + 1) * k + n];
                }
                beta[j * k + p] = log_sum_exp(&scratch);
            }
        }
        let log_z = log_sum_exp(&alpha[(d - 1) * k..]);
        let marginals =
            (0..d).map(|j| (0..k).map(|l| libm::exp(alpha[j * k + l] + beta[j * k + l] - log_z)).collect()).collect();
        let pairwise = (0..d.saturating_sub(1))
            .map(|j| {
                let mut m = vec![0.0; k * k];
                for p in 0..k {
                    for n in 0..k {
                        m[p * k + n] = libm::exp(
                            alpha[j * k + p] + self.t(p, n) + self.u(j + 1, n) + beta[(j + 1) * k + n] - log_z,
                        );
                    }
                }
                m
            })
            .collect();
        ForwardResult { log_z, marginals, pairwise }
    }

    /// Highest-scoring labeling. Among equal scores the lexicographically
    /// smallest labeling wins, compared from the first position: the lowest
    /// label index at the earliest position where optimal labelings differ.
    pub fn viterbi(&self) -> Vec<usize> {
        let (d, k) = (self.len, self.labels);
        // best[j*k+l]: best score of positions j.. given label l at j.
        let mut best = vec![0.0; d * k];
        let mut choice = vec![0usize; d * k];
        best[(d - 1) * k..].copy_from_slice(&self.unary[(d - 1) * k..]);
        for j in (0..d - 1).rev() {
            for l in 0..k {
                let mut arg = 0;
                let mut top = f64::NEG_INFINITY;
                for n in 0..k {
                    let s = self.t(l, n) + best[(j + 1) * k + n];
                    if s > top {
                        top = s;
                        arg = n;
                    }
                }
                best[j * k + l] = self.u(j, l) + top;
                choice[j * k + l] = arg;
            }
        }
        let mut path = Vec::with_capacity(d);
        path.push(argmax(&best[..k]));
        for j in 0..d - 1 {
            let prev = path[j];
            path.push(choice[j * k + prev]);
        }
        path
    }
}

/// Trained (or freshly initialized) CRF parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel {
    tagset: TagSet,
    schema_digest: String,
    /// Sorted, unique.
    attributes: Vec<String>,
    /// `attributes x labels`, row-major.
    unary: Vec<f64>,
    transitions: Vec<f64>,
    trained: bool,
}

/// Dense gradient with the same layout as the model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient {
    pub unary: Vec<f64>,
    pub transitions: Vec<f64>,
}

/// L1/L2 penalty coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Regularization {
    pub l1: f64,
    pub l2: f64,
}

/// Token attributes resolved to model indices.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    tokens: Vec<Vec<(u32, f64)>>,
}

impl CrfModel {
    /// Zero-weight model over the given attribute vocabulary.
    pub fn new(tagset: TagSet, mut attributes: Vec<String>) -> Self {
        attributes.sort_unstable();
        attributes.dedup();
        let k = tagset.len();
        Self {
            schema_digest: FeatureExtractor::standard().schema_digest(),
            unary: vec![0.0; attributes.len() * k],
            transitions: vec![0.0; k * k],
            attributes,
            tagset,
            trained: false,
        }
    }

    /// Zero-weight model whose vocabulary is every attribute in `ds`.
    pub fn for_dataset(ds: &Dataset) -> Result<Self> {
        let samples = ds.as_sequences()?;
        let mut attrs = alloc::collections::BTreeSet::new();
        for s in samples {
            for map in crf_features(s) {
                for (a, _) in token_attributes(&map) {
                    attrs.insert(a);
                }
            }
        }
        Ok(Self::new(ds.tagset.clone(), attrs.into_iter().collect()))
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn schema_digest(&self) -> &str {
        &self.schema_digest
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn unary(&self) -> &[f64] {
        &self.unary
    }

    pub fn unary_mut(&mut self) -> &mut [f64] {
        &mut self.unary
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn transitions_mut(&mut self) -> &mut [f64] {
        &mut self.transitions
    }

    pub fn weight_count(&self) -> usize {
        self.unary.len() + self.transitions.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.binary_search_by(|a| a.as_str().cmp(name)).ok()
    }

    pub fn encode(&self, features: &[FeatureMap]) -> EncodedSentence {
        let tokens = features
            .iter()
            .map(|map| {
                token_attributes(map)
                    .into_iter()
                    .filter_map(|(a, v)| self.attribute_index(&a).map(|i| (i as u32, v)))
                    .collect()
            })
            .collect();
        EncodedSentence { tokens }
    }

    pub fn potentials(&self, enc: &EncodedSentence) -> Result<Potentials> {
        let k = self.tagset.len();
        let d = enc.tokens.len();
        let mut unary = vec![0.0; d * k];
        for (j, attrs) in enc.tokens.iter().enumerate() {
            let row = &mut unary[j * k..(j + 1) * k];
            for &(a, v) in attrs {
                let w = &self.unary[a as usize * k..(a as usize + 1) * k];
                for (r, wl) in row.iter_mut().zip(w) {
                    *r += v * wl;
                }
            }
        }
        Potentials::new(d, k, unary, self.transitions.clone())
    }

    fn penalty(&self, reg: Regularization) -> f64 {
        self.unary.iter().chain(&self.transitions).map(|&w| reg.l1 * libm::fabs(w) + reg.l2 * w * w).sum()
    }

    /// Adds `scale * d loglik / d w` into the dense buffers; returns loglik.
    fn accumulate_loglik_grad(
        &self,
        enc: &EncodedSentence,
        labels: &[usize],
        scale: f64,
        g_unary: &mut [f64],
        g_trans: &mut [f64],
    ) -> Result<f64> {
        let k = self.tagset.len();
        let pot = self.potentials(enc)?;
        let fb = pot.forward_backward();
        let loglik = pot.score(labels) - fb.log_z;
        for (j, attrs) in enc.tokens.iter().enumerate() {
            let marg = &fb.marginals[j];
            for &(a, v) in attrs {
                let row = &mut g_unary[a as usize * k..(a as usize + 1) * k];
                for (l, g) in row.iter_mut().enumerate() {
                    *g -= scale * v * marg[l];
                }
                row[labels[j]] += scale * v;
            }
        }
        for (j, pair) in fb.pairwise.iter().enumerate() {
            for (g, p) in g_trans.iter_mut().zip(pair) {
                *g -= scale * p;
            }
            g_trans[labels[j] * k + labels[j + 1]] += scale;
        }
        Ok(loglik)
    }
}

/// Forward-backward over a sentence's token features.
pub fn crf_forward(model: &CrfModel, features: &[FeatureMap]) -> Result<ForwardResult> {
    Ok(model.potentials(&model.encode(features))?.forward_backward())
}

/// Regularized log-likelihood `log p(y|x) - l1*|w|_1 - l2*|w|^2` of one
/// labeled sentence and its gradient (L1 subgradient 0 at 0).
pub fn crf_loglik_grad(model: &CrfModel, sample: &SequenceSample, reg: Regularization) -> Result<(f64, CrfGradient)> {
    let k = model.tagset.len();
    if let Some(&bad) = sample.labels.iter().find(|&&l| l >= k) {
        return Err(Error::IndexOutOfRange { index: bad, len: k });
    }
    let enc = model.encode(&crf_features(sample));
    let mut grad = CrfGradient { unary: vec![0.0; model.unary.len()], transitions: vec![0.0; k * k] };
    let loglik = model.accumulate_loglik_grad(&enc, &sample.labels, 1.0, &mut grad.unary, &mut grad.transitions)?;
    for (g, &w) in grad.unary.iter_mut().zip(&model.unary) {
        *g -= reg.l1 * sign(w) + 2.0 * reg.l2 * w;
    }
    for (g, &w) in grad.transitions.iter_mut().zip(&model.transitions) {
        *g -= reg.l1 * sign(w) + 2.0 * reg.l2 * w;
    }
    Ok((loglik - model.penalty(reg), grad))
}

/// Training objective: mean negative log-likelihood over `ds` plus the
/// penalty divided by the dataset size.
pub fn crf_objective(model: &CrfModel, ds: &Dataset, reg: Regularization) -> Result<f64> {
    let samples = ds.as_sequences()?;
    if samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let n = samples.len() as f64;
    let mut total = 0.0;
    for s in samples {
        let pot = model.potentials(&model.encode(&crf_features(s)))?;
        total -= pot.score(&s.labels) - pot.forward_backward().log_z;
    }
    Ok(total / n + model.penalty(reg) / n)
}

/// Trains a CRF by minibatch gradient descent on
/// [`crf_objective`], with an optional per-step observer of the batch
/// objective.
pub fn crf_train_observed(train: &Dataset, cfg: &TrainConfig, mut observe: impl FnMut(usize, f64)) -> Result<CrfModel> {
    cfg.validate()?;
    let samples = train.as_sequences()?;
    if samples.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    ensure_valid(train)?;
    let mut model = CrfModel::for_dataset(train)?;
    let encoded: Vec<EncodedSentence> = samples.iter().map(|s| model.encode(&crf_features(s))).collect();
    let n = samples.len() as f64;
    let k = model.tagset.len();
    let mut g_unary = vec![0.0; model.unary.len()];
    let mut g_trans = vec![0.0; k * k];
    let mut sampler = BatchSampler::new(samples.len(), cfg.seed, STREAM_CRF_BATCHES);
    let reg = Regularization { l1: cfg.l1 / n, l2: cfg.l2 / n };
    let mut average = TailAverage::new(cfg, model.unary.len() + k * k);
    for step in 0..cfg.steps {
        let batch = sampler.next_batch(cfg.batch_size);
        let scale = 1.0 / batch.len() as f64;
        g_unary.fill(0.0);
        g_trans.fill(0.0);
        let mut loglik = 0.0;
        for &i in &batch {
            loglik +=
                model.accumulate_loglik_grad(&encoded[i], &samples[i].labels, scale, &mut g_unary, &mut g_trans)?;
        }
        observe(step, -loglik * scale + model.penalty(reg));
        let lr = cfg.learning_rate;
        for (w, g) in model.unary.iter_mut().zip(&g_unary) {
            *w += lr * (g - reg.l1 * sign(*w) - 2.0 * reg.l2 * *w);
        }
        for (w, g) in model.transitions.iter_mut().zip(&g_trans) {
            *w += lr * (g - reg.l1 * sign(*w) - 2.0 * reg.l2 * *w);
        }
        if let Some(avg) = average.as_mut() {
            avg.observe(step, model.unary.iter().chain(&model.transitions));
        }
    }
    if let Some(avg) = average {
        let mean = avg.mean();
        let (u, t) = mean.split_at(model.unary.len());
        model.unary.copy_from_slice(u);
        model.transitions.copy_from_slice(t);
    }
    if model.unary.iter().chain(&model.transitions).any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("CRF weights after training"));
    }
    model.trained = true;
    Ok(model)
}

pub fn crf_train(train: &Dataset, cfg: &TrainConfig) -> Result<CrfModel> {
    crf_train_observed(train, cfg, |_, _| {})
}

/// Viterbi labeling.
pub fn crf_decode(model: &CrfModel, features: &[FeatureMap]) -> Result<Vec<usize>> {
    Ok(model.potentials(&model.encode(features))?.viterbi())
}

/// Per-position argmax of the marginals, with the marginals.
pub fn crf_marginal_decode(model: &CrfModel, features: &[FeatureMap]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let fb = crf_forward(model, features)?;
    let labels = fb.marginals.iter().map(|m| argmax(m)).collect();
    Ok((labels, fb.marginals))
}

/// Viterbi labels for every sentence of `ds`.
pub fn crf_predict(model: &CrfModel, ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    if ds.tagset != model.tagset {
        return Err(Error::TagSetMismatch);
    }
    ds.as_sequences()?.iter().map(|s| crf_decode(model, &crf_features(s))).collect()
}

/// Marginals for every sentence of `ds`.
pub fn crf_predict_marginals(model: &CrfModel, ds: &Dataset) -> Result<Vec<Vec<Vec<f64>>>> {
    if ds.tagset != model.tagset {
        return Err(Error::TagSetMismatch);
    }
    ds.as_sequences()?.iter().map(|s| crf_forward(model, &crf_features(s)).map(|f| f.marginals)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Role;

    fn tags2() -> TagSet {
        TagSet::from_names(&["O", "GEO"], 0).unwrap()
    }

    fn enumerate_log_z(p: &Potentials) -> f64 {
        let (d, k) = (p.len, p.labels);
        let scores: Vec<f64> = (0..k.pow(d as u32))
            .map(|mut code| {
                let labels: Vec<usize> = (0..d)
                    .map(|_| {
                        let l = code % k;
                        code /= k;
                        l
                    })
                    .collect();
                p.score(&labels)
            })
            .collect();
        crate::math::log_sum_exp(&scores)
    }

    #[test]
    fn underflowing_scale_falls_back_to_log_space() {
        // Label 1 at position 0, then every transition out of it is -2000.
        let p = Potentials::new(2, 2, vec![-2000.0, 0.0, 0.0, 0.0], vec![-2000.0, 0.0, -2000.0, -2000.0]).unwrap();
        assert!(p.forward_backward_scaled().is_none());
        let fb = p.forward_backward();
        assert!((fb.log_z - enumerate_log_z(&p)).abs() < 1e-9);
        for m in &fb.marginals {
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_and_log_recursions_agree() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..50 {
            let (d, k) = (1 + rng.index(7), 1 + rng.index(5));
            let unary = (0..d * k).map(|_| 20.0 * (rng.next_f64() - 0.5)).collect();
            let trans = (0..k * k).map(|_| 20.0 * (rng.next_f64() - 0.5)).collect();
            let p = Potentials::new(d, k, unary, trans).unwrap();
            let (a, b) = (p.forward_backward_scaled().unwrap(), p.forward_backward_log());
            assert!((a.log_z - b.log_z).abs() < 1e-9);
            for (x, y) in a.marginals.iter().flatten().zip(b.marginals.iter().flatten()) {
                assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in a.pairwise.iter().flatten().zip(b.pairwise.iter().flatten()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uniform_model() {
        let model = CrfModel::new(tags2(), vec![]);
        let s = SequenceSample::from_strs(&["a", "b", "c"], &[0, 0, 0]);
        let fb = crf_forward(&model, &crf_features(&s)).unwrap();
        assert!((fb.log_z - 3.0 * core::f64::consts::LN_2).abs() < 1e-12);
        for m in fb.marginals.iter().flatten() {
            assert!((m - 0.5).abs() < 1e-12);
        }
        assert_eq!(crf_decode(&model, &crf_features(&s)).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn single_token_chain() {
        let pot = Potentials::new(1, 3, vec![0.1, 2.0, -1.0], vec![5.0; 9]).unwrap();
        let fb = pot.forward_backward();
        assert!((fb.log_z - log_sum_exp(&[0.1, 2.0, -1.0])).abs() < 1e-12);
        assert!(fb.pairwise.is_empty());
        assert_eq!(pot.viterbi(), vec![1]);
    }

    #[test]
    fn non_finite_potentials_rejected() {
        assert!(matches!(Potentials::new(1, 2, vec![f64::NAN, 0.0], vec![0.0; 4]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn peaked_unaries_decode_per_position() {
        let unary = vec![9.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0, 0.0, 9.0];
        let pot = Potentials::new(3, 3, unary, vec![0.1, -0.2, 0.3, 0.0, 0.2, -0.1, 0.05, 0.0, 0.0]).unwrap();
        assert_eq!(pot.viterbi(), vec![0, 1, 2]);
    }

    #[test]
    fn l2_term_is_linear_in_coefficient() {
        let mut model = CrfModel::new(tags2(), vec!["bias".into(), "is_title".into()]);
        model.unary_mut().copy_from_slice(&[0.3, -0.2, 0.5, 0.1]);
        model.transitions_mut().copy_from_slice(&[0.2, -0.4, 0.0, 0.7]);
        let s = SequenceSample::from_strs(&["Paris", "is"], &[1, 0]);
        let (_, g0) = crf_loglik_grad(&model, &s, Regularization::default()).unwrap();
        let (_, g1) = crf_loglik_grad(&model, &s, Regularization { l1: 0.0, l2: 0.1 }).unwrap();
        let (_, g2) = crf_loglik_grad(&model, &s, Regularization { l1: 0.0, l2: 0.2 }).unwrap();
        for i in 0..g0.unary.len() {
            let t1 = g1.unary[i] - g0.unary[i];
            let t2 = g2.unary[i] - g0.unary[i];
            assert!((t2 - 2.0 * t1).abs() < 1e-15, "{t1} {t2}");
        }
    }

    #[test]
    fn memorizes_separable_sentence() {
        let ts = tags2();
        let s = SequenceSample::from_strs(&["We", "visited", "Paris", "and", "Rome", "."], &[0, 0, 1, 0, 1, 0]);
        let ds = Dataset::sequences(ts, vec![s.clone()], Role::Clean);
        let cfg = TrainConfig {
            steps: 200,
            batch_size: 1,
            learning_rate: 0.5,
            l1: 0.0,
            l2: 0.0,
            seed: 3,
            tail_average: false,
            method: Default::default(),
        };
        let model = crf_train(&ds, &cfg).unwrap();
        assert!(model.is_trained());
        assert_eq!(crf_decode(&model, &crf_features(&s)).unwrap(), s.labels);
        let again = crf_train(&ds, &cfg).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn empty_training_set_rejected() {
        let ds = Dataset::sequences(tags2(), vec![], Role::Clean);
        assert!(matches!(crf_train(&ds, &TrainConfig::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn unknown_attributes_are_ignored() {
        let model = CrfModel::new(tags2(), vec!["bias".into()]);
        let enc = model.encode(&crf_features(&SequenceSample::from_strs(&["zzz"], &[0])));
        assert_eq!(enc.tokens[0].len(), 1);
    }
}
