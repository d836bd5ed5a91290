//! The error-correcting network `g`.
//!
//! `g` is one model shared by every element. For element `j` it sees the
//! base prediction `yhat_j` plus a relevant subset (RS) of the input and of
//! the neighbouring predictions, and outputs a corrected label
//! distribution. It is trained on gold data while `f` stays frozen, then
//! used to relabel the corrupted corpus, on which a fresh `f'` is trained.
//!
//! Sequence inputs are named slots, in order:
//!
//! | slot | content |
//! |------|---------|
//! | `y` | `yhat_j` as a label name (hard) or `y:<label>` probabilities (soft) |
//! | `x:<feature>` | the first `n_token_features` token features of token `j` |
//! | `n-k` .. `n+k` | neighbour labels, `<INVALID>` past the sentence edge |
//!
//! Grid inputs are dense: the `w x w x K` window of predictions followed by
//! the `w x w x 3` window of pixels, both reflection-padded.
//!
//! The `x_only` and `y_only` variants keep every slot but fill the
//! suppressed block (neighbour labels, resp. token features; for grids the
//! whole prediction window, resp. pixel window) with the invalid symbol
//! (`0.0` for dense inputs) or with seeded uniform floats.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::base::{evaluate, train_base, BaseConfig, BaseModel, Evaluation, Predictions};
use crate::crf::token_attributes;
use crate::data::{ensure_valid, Dataset, FeatureMap, FeatureValue, Role, TagSet};
use crate::features::{FeatureExtractor, FEATURE_COUNT};
use crate::math::{argmax, sign, softmax};
use crate::mlp::Mlp;
use crate::optim::{BatchSampler, Method, Stepper, TailAverage, TrainConfig};
use crate::patch::{check_window_fits, ChannelGrid};
use crate::rng::SplitMix64;
use crate::{Error, Result};

pub const INVALID_SYMBOL: &str = "<INVALID>";
const STREAM_FILL: u64 = 0x51;
const STREAM_ECN_BATCHES: u64 = 0x52;
const STREAM_ECN_INIT: u64 = 0x53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsVariant {
    XOnly,
    YOnly,
    Full,
}

impl RsVariant {
    pub fn uses_x(self) -> bool {
        self != RsVariant::YOnly
    }

    pub fn uses_y(self) -> bool {
        self != RsVariant::XOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RsVariant::XOnly => "x_only",
            RsVariant::YOnly => "y_only",
            RsVariant::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x_only" => Ok(RsVariant::XOnly),
            "y_only" => Ok(RsVariant::YOnly),
            "full" => Ok(RsVariant::Full),
            _ => Err(Error::InvalidParameter(format!("unknown RS variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationFill {
    InvalidSymbol,
    RandomFloats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YhatMode {
    Hard,
    Soft,
}

/// Where neighbour labels come from when correcting: `f`'s predictions or
/// the dataset's own (observed) labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSource {
    Predicted,
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevantSubsetSpec {
    pub variant: RsVariant,
    /// Sequence neighbour radius `k`.
    pub radius: usize,
    /// Grid window side `w`. Even windows put the target just below and
    /// right of the centre.
    pub window: usize,
    pub ablation_fill: AblationFill,
    pub n_token_features: usize,
    /// `None`: hard for sequences, soft for grids.
    pub yhat: Option<YhatMode>,
    pub neighbor_source: NeighborSource,
    pub fill_seed: u64,
}

impl Default for RelevantSubsetSpec {
    fn default() -> Self {
        Self {
            variant: RsVariant::Full,
            radius: 3,
            window: 9,
            ablation_fill: AblationFill::InvalidSymbol,
            n_token_features: FEATURE_COUNT,
            yhat: None,
            neighbor_source: NeighborSource::Predicted,
            fill_seed: 0,
        }
    }
}

impl RelevantSubsetSpec {
    pub fn with_variant(&self, variant: RsVariant) -> Self {
        Self { variant, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("RS window must be positive".into()));
        }
        if self.n_token_features > FEATURE_COUNT {
            return Err(Error::InvalidParameter(format!(
                "n_token_features {} exceeds {FEATURE_COUNT}",
                self.n_token_features
            )));
        }
        Ok(())
    }

    pub fn yhat_mode(&self, sequence: bool) -> YhatMode {
        self.yhat.unwrap_or(if sequence { YhatMode::Hard } else { YhatMode::Soft })
    }

    /// Number of slots (sequences) or values (grids) in every RS input.
    pub fn input_width(&self, labels: usize, sequence: bool) -> usize {
        if sequence {
            1 + self.n_token_features + 2 * self.radius
        } else {
            self.window * self.window * (labels + 3)
        }
    }

    fn extractor(&self) -> FeatureExtractor {
        FeatureExtractor::first(self.n_token_features)
    }

    fn fill_rng(&self, sample: usize, element: usize) -> SplitMix64 {
        SplitMix64::stream(self.fill_seed, &[STREAM_FILL, sample as u64, element as u64])
    }
}

/// Base predictions for one sample.
#[derive(Debug, Clone, Copy)]
pub enum Yhat<'a> {
    Hard(&'a [usize]),
    Soft(&'a [Vec<f64>]),
}

impl Yhat<'_> {
    fn len(&self) -> usize {
        match self {
            Yhat::Hard(l) => l.len(),
            Yhat::Soft(p) => p.len(),
        }
    }

    fn label(&self, j: usize) -> usize {
        match self {
            Yhat::Hard(l) => l[j],
            Yhat::Soft(p) => argmax(&p[j]),
        }
    }
}

/// One corrector input.
#[derive(Debug, Clone, PartialEq)]
pub enum RsInput {
    Slots(Vec<(String, FeatureValue)>),
    Dense(Vec<f64>),
}

impl RsInput {
    pub fn len(&self) -> usize {
        match self {
            RsInput::Slots(s) => s.len(),
            RsInput::Dense(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The corrector input for element `j` of sample `i` of `x`.
pub fn build_rs_sample(x: &Dataset, i: usize, yhat: Yhat<'_>, j: usize, spec: &RelevantSubsetSpec) -> Result<RsInput> {
    spec.validate()?;
    if i >= x.len() {
        return Err(Error::IndexOutOfRange { index: i, len: x.len() });
    }
    let d = x.labels_of(i).len();
    if yhat.len() != d {
        return Err(Error::LengthMismatch { what: "predictions", expected: d, found: yhat.len() });
    }
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, len: d });
    }
    if x.is_sequence() {
        let builder = SequenceRs::new(x, spec);
        Ok(RsInput::Slots(builder.slots(i, yhat, j)))
    } else {
        let g = &x.as_grids()?[i];
        check_window_fits(spec.window, g.height, g.width)?;
        let ctx = GridRs::new(x, i, yhat, spec)?;
        let mut out = Vec::with_capacity(spec.input_width(x.tagset.len(), false));
        ctx.fill(j, &mut out);
        Ok(RsInput::Dense(out))
    }
}

struct SequenceRs<'a> {
    ds: &'a Dataset,
    spec: &'a RelevantSubsetSpec,
    extractor: FeatureExtractor,
}

impl<'a> SequenceRs<'a> {
    fn new(ds: &'a Dataset, spec: &'a RelevantSubsetSpec) -> Self {
        Self { ds, spec, extractor: spec.extractor() }
    }

    fn slots(&self, i: usize, yhat: Yhat<'_>, j: usize) -> Vec<(String, FeatureValue)> {
        let tagset = &self.ds.tagset;
        let spec = self.spec;
        let sample = &self.ds.as_sequences().expect("sequence dataset")[i];
        let mut rng = spec.fill_rng(i, j);
        let fill = |rng: &mut SplitMix64| match spec.ablation_fill {
            AblationFill::InvalidSymbol => FeatureValue::Str(INVALID_SYMBOL.to_string()),
            AblationFill::RandomFloats => FeatureValue::Num(rng.next_f64()),
        };
        let mut out = Vec::with_capacity(spec.input_width(tagset.len(), true) + tagset.len());
        match yhat {
            Yhat::Hard(l) => out.push(("y".to_string(), FeatureValue::Str(tagset.name(l[j]).to_string()))),
            Yhat::Soft(p) => {
                for (c, &v) in p[j].iter().enumerate() {
                    out.push((format!("y:{}", tagset.name(c)), FeatureValue::Num(v)));
                }
            }
        }
        for (name, value) in self.extractor.extract_one(&sample.tokens, j) {
            let v = if spec.variant.uses_x() { value } else { fill(&mut rng) };
            out.push((format!("x:{name}"), v));
        }
        let d = sample.len() as isize;
        let radius = spec.radius as isize;
        for off in (-radius..=radius).filter(|&o| o != 0) {
            let v = if spec.variant.uses_y() {
                let p = j as isize + off;
                if p < 0 || p >= d {
                    FeatureValue::Str(INVALID_SYMBOL.to_string())
                } else {
                    let label = match spec.neighbor_source {
                        NeighborSource::Predicted => yhat.label(p as usize),
                        NeighborSource::Observed => sample.labels[p as usize],
                    };
                    FeatureValue::Str(tagset.name(label).to_string())
                }
            } else {
                fill(&mut rng)
            };
            out.push((format!("n{off:+}"), v));
        }
        out
    }
}

struct GridRs<'a> {
    spec: &'a RelevantSubsetSpec,
    sample: usize,
    labels: usize,
    yhat: ChannelGrid,
    pixels: ChannelGrid,
}

impl<'a> GridRs<'a> {
    fn new(ds: &Dataset, i: usize, yhat: Yhat<'_>, spec: &'a RelevantSubsetSpec) -> Result<Self> {
        let g = &ds.as_grids()?[i];
        let k = ds.tagset.len();
        let rows: Vec<Vec<f64>> = match yhat {
            Yhat::Hard(l) => l.iter().map(|&c| ds.tagset.one_hot(c)).collect(),
            Yhat::Soft(p) => p.to_vec(),
        };
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch { what: "prediction distribution", expected: k, found: bad.len() });
        }
        Ok(Self {
            spec,
            sample: i,
            labels: k,
            yhat: ChannelGrid::new(g.height, g.width, k, rows.concat()),
            pixels: ChannelGrid::from_pixels(g),
        })
    }

    fn fill(&self, j: usize, out: &mut Vec<f64>) {
        let spec = self.spec;
        let (r, c) = (j / self.yhat.width, j % self.yhat.width);
        let area = spec.window * spec.window;
        let mut rng = spec.fill_rng(self.sample, j);
        let mut suppressed = |n: usize, out: &mut Vec<f64>| match spec.ablation_fill {
            AblationFill::InvalidSymbol => out.extend(core::iter::repeat_n(0.0, n)),
            AblationFill::RandomFloats => out.extend((0..n).map(|_| rng.next_f64())),
        };
        if spec.variant.uses_y() {
            self.yhat.window_into(r, c, spec.window, out);
        } else {
            suppressed(area * self.labels, out);
        }
        if spec.variant.uses_x() {
            self.pixels.window_into(r, c, spec.window, out);
        } else {
            suppressed(area * 3, out);
        }
    }
}

/// Sparse multinomial logistic regression over named attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    labels: usize,
    /// Sorted, unique.
    attributes: Vec<String>,
    /// `attributes x labels`, row-major.
    weights: Vec<f64>,
}

type Encoded = Vec<(u32, f64)>;

impl LogisticModel {
    pub fn new(labels: usize, mut attributes: Vec<String>) -> Self {
        attributes.sort_unstable();
        attributes.dedup();
        Self { labels, weights: vec![0.0; attributes.len() * labels], attributes }
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn encode(&self, slots: &[(String, FeatureValue)]) -> Encoded {
        let map: FeatureMap = slots.iter().cloned().collect();
        token_attributes(&map)
            .into_iter()
            .filter_map(|(a, v)| self.attributes.binary_search(&a).ok().map(|i| (i as u32, v)))
            .collect()
    }

    fn probs(&self, enc: &[(u32, f64)]) -> Vec<f64> {
        let k = self.labels;
        let mut scores = vec![0.0; k];
        for &(a, v) in enc {
            for (s, w) in scores.iter_mut().zip(&self.weights[a as usize * k..(a as usize + 1) * k]) {
                *s += v * w;
            }
        }
        softmax(&mut scores);
        scores
    }

    pub fn predict(&self, slots: &[(String, FeatureValue)]) -> Vec<f64> {
        self.probs(&self.encode(slots))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "corrector", rename_all = "snake_case")]
pub enum Corrector {
    Logistic(LogisticModel),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcnTrainConfig {
    /// `steps` is S2 and `batch_size` is B2 (gold samples per step).
    pub train: TrainConfig,
    /// Hidden layer sizes of the grid corrector.
    pub hidden: Vec<usize>,
    /// Grid border strip left uncorrected; `None` means `ceil(w / 2)`.
    pub border: Option<usize>,
}

impl Default for EcnTrainConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                steps: 1500,
                batch_size: 8,
                learning_rate: 0.5,
                method: Method::Adagrad,
                ..TrainConfig::default()
            },
            hidden: vec![16],
            border: None,
        }
    }
}

impl EcnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()
    }

    pub fn border_for(&self, spec: &RelevantSubsetSpec) -> usize {
        self.border.unwrap_or(spec.window.div_ceil(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcnModel {
    pub spec: RelevantSubsetSpec,
    pub tagset: TagSet,
    pub border: usize,
    pub feature_schema: String,
    pub corrector: Corrector,
}

impl EcnModel {
    /// Corrected label distribution for one RS input.
    pub fn predict(&self, input: &RsInput) -> Result<Vec<f64>> {
        match (&self.corrector, input) {
            (Corrector::Logistic(m), RsInput::Slots(s)) => Ok(m.predict(s)),
            (Corrector::Mlp(m), RsInput::Dense(x)) => {
                if x.len() != m.input_size() {
                    return Err(Error::LengthMismatch { what: "RS input", expected: m.input_size(), found: x.len() });
                }
                Ok(m.forward(x))
            }
            _ => Err(Error::WrongKind { expected: if self.is_sequence() { "sequence" } else { "grid" } }),
        }
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self.corrector, Corrector::Logistic(_))
    }
}

/// Progress of one corrector update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcnStep {
    pub step: usize,
    /// Supervised (RS input, label) pairs in this batch.
    pub samples: usize,
    pub loss: f64,
}

fn select_yhat<'a>(pred: &'a Predictions, i: usize, mode: YhatMode) -> Yhat<'a> {
    match mode {
        YhatMode::Hard => Yhat::Hard(&pred.labels[i]),
        YhatMode::Soft => Yhat::Soft(&pred.soft[i]),
    }
}

fn check_gold(f: &BaseModel, gold: &Dataset, spec: &RelevantSubsetSpec, cfg: &EcnTrainConfig) -> Result<()> {
    if gold.is_empty() {
        return Err(Error::Empty("gold dataset"));
    }
    ensure_valid(gold)?;
    spec.validate()?;
    cfg.validate()?;
    if &gold.tagset != f.tagset() {
        return Err(Error::TagSetMismatch);
    }
    if gold.is_sequence() != f.is_sequence() {
        return Err(Error::WrongKind { expected: if f.is_sequence() { "sequence" } else { "grid" } });
    }
    Ok(())
}

pub fn ecn_train(f: &BaseModel, gold: &Dataset, spec: &RelevantSubsetSpec, cfg: &EcnTrainConfig) -> Result<EcnModel> {
    ecn_train_observed(f, gold, spec, cfg, |_| {})
}

/// Trains `g` on gold data with `f` frozen: each of the S2 steps draws B2
/// gold samples, turns every element of each into an (RS input, true
/// label) pair and makes one gradient update.
pub fn ecn_train_observed(
    f: &BaseModel,
    gold: &Dataset,
    spec: &RelevantSubsetSpec,
    cfg: &EcnTrainConfig,
    observe: impl FnMut(EcnStep),
) -> Result<EcnModel> {
    check_gold(f, gold, spec, cfg)?;
    let pred = f.predict(gold)?;
    let corrector = if gold.is_sequence() {
        Corrector::Logistic(train_logistic(gold, &pred, spec, &cfg.train, observe)?)
    } else {
        Corrector::Mlp(train_grid_corrector(gold, &pred, spec, cfg, observe)?)
    };
    Ok(EcnModel {
        spec: spec.clone(),
        tagset: gold.tagset.clone(),
        border: cfg.border_for(spec),
        feature_schema: spec.extractor().schema_digest(),
        corrector,
    })
}

fn train_logistic(
    gold: &Dataset,
    pred: &Predictions,
    spec: &RelevantSubsetSpec,
    cfg: &TrainConfig,
    mut observe: impl FnMut(EcnStep),
) -> Result<LogisticModel> {
    let k = gold.tagset.len();
    let builder = SequenceRs::new(gold, spec);
    let mode = spec.yhat_mode(true);
    let slots: Vec<Vec<Vec<(String, FeatureValue)>>> = (0..gold.len())
        .map(|i| (0..gold.labels_of(i).len()).map(|j| builder.slots(i, select_yhat(pred, i, mode), j)).collect())
        .collect();
    let mut vocab = alloc::collections::BTreeSet::new();
    for s in slots.iter().flatten() {
        let map: FeatureMap = s.iter().cloned().collect();
        vocab.extend(token_attributes(&map).into_iter().map(|(a, _)| a));
    }
    let mut model = LogisticModel::new(k, vocab.into_iter().collect());
    let encoded: Vec<Vec<Encoded>> = slots.iter().map(|sent| sent.iter().map(|s| model.encode(s)).collect()).collect();
    let n = gold.element_count() as f64;
    let (l1, l2) = (cfg.l1 / n, cfg.l2 / n);
    let mut grad = vec![0.0; model.weights.len()];
    let mut sampler = BatchSampler::new(gold.len(), cfg.seed, STREAM_ECN_BATCHES);
    let mut average = TailAverage::new(cfg, model.weights.len());
    let mut stepper = Stepper::new(cfg, model.weights.len());
    for step in 0..cfg.steps {
        let batch = sampler.next_batch(cfg.batch_size);
        let count: usize = batch.iter().map(|&i| encoded[i].len()).sum();
        let scale = 1.0 / count as f64;
        grad.fill(0.0);
        let mut loss = 0.0;
        for &i in &batch {
            for (enc, &y) in encoded[i].iter().zip(gold.labels_of(i)) {
                let mut p = model.probs(enc);
                loss -= libm::log(p[y].max(f64::MIN_POSITIVE)) * scale;
                p[y] -= 1.0;
                for &(a, v) in enc {
                    let row = &mut grad[a as usize * k..(a as usize + 1) * k];
                    for (g, pl) in row.iter_mut().zip(&p) {
                        *g += scale * v * pl;
                    }
                }
            }
        }
        loss += model.weights.iter().map(|&w| l1 * libm::fabs(w) + l2 * w * w).sum::<f64>();
        observe(EcnStep { step, samples: count, loss });
        for (g, &w) in grad.iter_mut().zip(&model.weights) {
            *g += l1 * sign(w) + 2.0 * l2 * w;
        }
        stepper.apply(&mut model.weights, &grad);
        if let Some(avg) = average.as_mut() {
            avg.observe(step, &model.weights);
        }
    }
    if let Some(avg) = average {
        model.weights = avg.mean();
    }
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("corrector weights after training"));
    }
    Ok(model)
}

fn train_grid_corrector(
    gold: &Dataset,
    pred: &Predictions,
    spec: &RelevantSubsetSpec,
    cfg: &EcnTrainConfig,
    mut observe: impl FnMut(EcnStep),
) -> Result<Mlp> {
    let grids = gold.as_grids()?;
    for g in grids {
        check_window_fits(spec.window, g.height, g.width)?;
    }
    let k = gold.tagset.len();
    let mode = spec.yhat_mode(false);
    let contexts: Vec<GridRs<'_>> =
        (0..gold.len()).map(|i| GridRs::new(gold, i, select_yhat(pred, i, mode), spec)).collect::<Result<_>>()?;
    let width = spec.input_width(k, false);
    let mut net = Mlp::new(width, &cfg.hidden, k, cfg.train.seed, STREAM_ECN_INIT);
    let mut sampler = BatchSampler::new(gold.len(), cfg.train.seed, STREAM_ECN_BATCHES);
    let mut average = TailAverage::new(&cfg.train, net.param_count());
    let mut stepper = Stepper::new(&cfg.train, net.param_count());
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for step in 0..cfg.train.steps {
        inputs.clear();
        targets.clear();
        for i in sampler.next_batch(cfg.train.batch_size) {
            for (j, &y) in grids[i].labels.iter().enumerate() {
                contexts[i].fill(j, &mut inputs);
                targets.push(y);
            }
        }
        let (loss, grad) = net.loss_grad(&inputs, &targets, cfg.train.l1, cfg.train.l2)?;
        observe(EcnStep { step, samples: targets.len(), loss });
        let mut params = net.params();
        stepper.apply(&mut params, &grad.flatten());
        net.set_params(&params);
        if let Some(avg) = average.as_mut() {
            avg.observe(step, &params);
        }
    }
    if let Some(avg) = average {
        net.set_params(&avg.mean());
    }
    if !net.is_finite() {
        return Err(Error::NonFinite("corrector weights after training"));
    }
    Ok(net)
}

fn in_border(j: usize, height: usize, width: usize, border: usize) -> bool {
    let (r, c) = (j / width, j % width);
    r < border || c < border || r + border >= height || c + border >= width
}

/// Relabels `ds`: `yhat = f(x)`, then every element (outside the grid
/// border strip, which keeps `yhat`) becomes the argmax of `g`.
pub fn ecn_correct(f: &BaseModel, g: &EcnModel, ds: &Dataset) -> Result<Dataset> {
    if &ds.tagset != f.tagset() || ds.tagset != g.tagset {
        return Err(Error::TagSetMismatch);
    }
    let pred = f.predict(ds)?;
    ecn_correct_predicted(g, ds, &pred)
}

/// [`ecn_correct`] with `f`'s predictions already computed.
pub fn ecn_correct_predicted(g: &EcnModel, ds: &Dataset, pred: &Predictions) -> Result<Dataset> {
    if ds.tagset != g.tagset {
        return Err(Error::TagSetMismatch);
    }
    if ds.is_sequence() != g.is_sequence() {
        return Err(Error::WrongKind { expected: if g.is_sequence() { "sequence" } else { "grid" } });
    }
    let mode = g.spec.yhat_mode(ds.is_sequence());
    let mut labels = Vec::with_capacity(ds.len());
    if ds.is_sequence() {
        let builder = SequenceRs::new(ds, &g.spec);
        for i in 0..ds.len() {
            let yhat = select_yhat(pred, i, mode);
            let row = (0..ds.labels_of(i).len())
                .map(|j| g.predict(&RsInput::Slots(builder.slots(i, yhat, j))).map(|p| argmax(&p)))
                .collect::<Result<Vec<_>>>()?;
            labels.push(row);
        }
    } else {
        let Corrector::Mlp(net) = &g.corrector else {
            return Err(Error::WrongKind { expected: "sequence" });
        };
        if net.input_size() != g.spec.input_width(ds.tagset.len(), false) {
            return Err(Error::LengthMismatch {
                what: "RS input",
                expected: net.input_size(),
                found: g.spec.input_width(ds.tagset.len(), false),
            });
        }
        let mut buf = Vec::new();
        for (i, grid) in ds.as_grids()?.iter().enumerate() {
            let ctx = GridRs::new(ds, i, select_yhat(pred, i, mode), &g.spec)?;
            let mut row = pred.labels[i].clone();
            for (j, slot) in row.iter_mut().enumerate() {
                if in_border(j, grid.height, grid.width, g.border) {
                    continue;
                }
                buf.clear();
                ctx.fill(j, &mut buf);
                *slot = argmax(&net.forward(&buf));
            }
            labels.push(row);
        }
    }
    ds.with_labels(labels, Role::Corrupted)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub base: BaseConfig,
    pub ecn: EcnTrainConfig,
}

impl PipelineConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = Self { base: self.base.with_seed(seed), ecn: self.ecn.clone() };
        out.ecn.train.seed = seed;
        out
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub f: BaseModel,
    pub g: EcnModel,
    pub corrected: Dataset,
    pub f_prime: BaseModel,
    pub evaluation: Evaluation,
}

/// Train `f` on corrupted data, train `g` on gold, correct the corrupted
/// corpus, train a fresh `f'` on the corrected corpus only and score it on
/// `test`.
pub fn ecn_pipeline(
    corrupted: &Dataset,
    gold: &Dataset,
    test: &Dataset,
    spec: &RelevantSubsetSpec,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    if corrupted.tagset != gold.tagset || corrupted.tagset != test.tagset {
        return Err(Error::TagSetMismatch);
    }
    let f = train_base(corrupted, &cfg.base)?;
    ecn_pipeline_with_base(f, corrupted, gold, test, spec, cfg)
}

/// [`ecn_pipeline`] reusing an `f` already trained on `corrupted`.
pub fn ecn_pipeline_with_base(
    f: BaseModel,
    corrupted: &Dataset,
    gold: &Dataset,
    test: &Dataset,
    spec: &RelevantSubsetSpec,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    if corrupted.tagset != gold.tagset || corrupted.tagset != test.tagset {
        return Err(Error::TagSetMismatch);
    }
    let g = ecn_train(&f, gold, spec, &cfg.ecn)?;
    let corrected = ecn_correct(&f, &g, corrupted)?;
    let f_prime = train_base(&corrected, &cfg.base)?;
    let evaluation = evaluate(&f_prime, test)?;
    Ok(PipelineOutput { f, g, corrected, f_prime, evaluation })
}
