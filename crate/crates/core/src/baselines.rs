//! Comparison strategies and result rows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::base::{evaluate, train_base, BaseModel, Evaluation};
use crate::data::{Dataset, Role};
use crate::ecn::{ecn_pipeline_with_base, PipelineConfig, RelevantSubsetSpec, RsVariant};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CorruptedOnly,
    GoldOnly,
    Combined,
    Pseudolabel,
    Clean,
    EcnXOnly,
    EcnYOnly,
    EcnFull,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Clean,
        Strategy::CorruptedOnly,
        Strategy::GoldOnly,
        Strategy::Combined,
        Strategy::Pseudolabel,
        Strategy::EcnXOnly,
        Strategy::EcnYOnly,
        Strategy::EcnFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CorruptedOnly => "corrupted_only",
            Strategy::GoldOnly => "gold_only",
            Strategy::Combined => "combined",
            Strategy::Pseudolabel => "pseudolabel",
            Strategy::Clean => "clean",
            Strategy::EcnXOnly => "ecn_x_only",
            Strategy::EcnYOnly => "ecn_y_only",
            Strategy::EcnFull => "ecn_full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}")))
    }

    pub fn rs_variant(self) -> Option<RsVariant> {
        match self {
            Strategy::EcnXOnly => Some(RsVariant::XOnly),
            Strategy::EcnYOnly => Some(RsVariant::YOnly),
            Strategy::EcnFull => Some(RsVariant::Full),
            _ => None,
        }
    }

    /// Whether the strategy trains on the corrupted corpus first.
    pub fn uses_corrupted_base(self) -> bool {
        self == Strategy::CorruptedOnly || self.rs_variant().is_some()
    }
}

/// The datasets every strategy draws from.
#[derive(Debug, Clone, Copy)]
pub struct BaselineData<'a> {
    pub corrupted: &'a Dataset,
    pub gold: &'a Dataset,
    pub test: &'a Dataset,
    pub clean: Option<&'a Dataset>,
}

impl BaselineData<'_> {
    fn check(&self) -> Result<()> {
        let t = &self.test.tagset;
        if &self.corrupted.tagset != t || &self.gold.tagset != t || self.clean.is_some_and(|c| &c.tagset != t) {
            return Err(Error::TagSetMismatch);
        }
        Ok(())
    }
}

/// Trains the model of `strategy` and scores it on the test set.
pub fn run_baseline(
    strategy: Strategy,
    data: BaselineData<'_>,
    spec: &RelevantSubsetSpec,
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    run_baseline_with(strategy, data, spec, cfg, None)
}

/// Runs several strategies, training the shared corrupted-data base model
/// once.
pub fn run_strategies(
    strategies: &[Strategy],
    data: BaselineData<'_>,
    spec: &RelevantSubsetSpec,
    cfg: &PipelineConfig,
) -> Result<Vec<(Strategy, Evaluation)>> {
    data.check()?;
    let base = if strategies.iter().any(|s| s.uses_corrupted_base()) {
        Some(train_base(data.corrupted, &cfg.base)?)
    } else {
        None
    };
    strategies
        .iter()
        .map(|&s| {
            let f = if s.uses_corrupted_base() { base.clone() } else { None };
            run_baseline_with(s, data, spec, cfg, f).map(|e| (s, e))
        })
        .collect()
}

/// [`run_baseline`] with the corrupted-data base model supplied by the
/// caller. `f` must be `Some` when the strategy
/// [uses it](Strategy::uses_corrupted_base); it is trained here otherwise.
pub fn run_baseline_with(
    strategy: Strategy,
    data: BaselineData<'_>,
    spec: &RelevantSubsetSpec,
    cfg: &PipelineConfig,
    f: Option<BaseModel>,
) -> Result<Evaluation> {
    data.check()?;
    let f = match f {
        None if strategy.uses_corrupted_base() => Some(train_base(data.corrupted, &cfg.base)?),
        f => f,
    };
    let fit = |ds: &Dataset| train_base(ds, &cfg.base);
    match strategy {
        Strategy::CorruptedOnly => evaluate(&f.expect("base model"), data.test),
        Strategy::GoldOnly => {
            if data.gold.is_empty() {
                return Err(Error::Empty("gold dataset"));
            }
            evaluate(&fit(data.gold)?, data.test)
        }
        Strategy::Combined => evaluate(&fit(&data.corrupted.concat(data.gold, Role::Corrupted)?)?, data.test),
        Strategy::Pseudolabel => {
            if data.gold.is_empty() {
                return Err(Error::Empty("gold dataset"));
            }
            let f_gold = fit(data.gold)?;
            let relabeled = data.corrupted.with_labels(f_gold.predict_labels(data.corrupted)?, Role::Corrupted)?;
            evaluate(&fit(&relabeled)?, data.test)
        }
        Strategy::Clean => {
            let clean = data.clean.ok_or(Error::Empty("clean dataset"))?;
            evaluate(&fit(clean)?, data.test)
        }
        Strategy::EcnXOnly | Strategy::EcnYOnly | Strategy::EcnFull => {
            let variant = strategy.rs_variant().expect("ECN strategy");
            let out = ecn_pipeline_with_base(
                f.expect("base model"),
                data.corrupted,
                data.gold,
                data.test,
                &spec.with_variant(variant),
                cfg,
            )?;
            Ok(out.evaluation)
        }
    }
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub strategy: Strategy,
    pub metric: String,
    pub score: f64,
    pub seed: u64,
    pub runtime_s: Option<f64>,
}

/// The weighted and macro rows of one evaluation.
pub fn result_rows(dataset: &str, strategy: Strategy, seed: u64, eval: &Evaluation) -> [ResultRow; 2] {
    let [w, m] = eval.metric_names();
    let row = |metric: &str, score| ResultRow {
        dataset: dataset.into(),
        strategy,
        metric: metric.into(),
        score,
        seed,
        runtime_s: None,
    };
    [row(w, eval.weighted), row(m, eval.macro_avg)]
}
