//! Experiment orchestration: data, corruption, strategies, result tables and
//! run directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ecn_core::base::{train_base, Evaluation};
use ecn_core::baselines::{result_rows, run_baseline_with, BaselineData, ResultRow, Strategy};
use ecn_core::corruption::CorruptionSpec;
use ecn_core::data::{Dataset, Role, TagSet};
use ecn_core::rng::SplitMix64;
use ecn_core::synth::{gen_synthetic_grids, gen_synthetic_sequences};
use rayon::prelude::*;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{LabError, Result, Stage};
use crate::io::{self, conll_labels, read_tagset, read_text, ConllOptions};

pub const THREADS_ENV: &str = "ECN_LAB_THREADS";
pub const RESULTS_HEADER: [&str; 6] = ["dataset", "strategy", "metric", "score", "seed", "runtime_s"];
const STREAM_SPLIT: u64 = 0x71;

/// Train / gold / test before corruption.
#[derive(Debug, Clone)]
pub struct Splits {
    pub tagset: TagSet,
    pub train: Dataset,
    pub gold: Dataset,
    pub test: Dataset,
    /// Clean counterpart of `train` when `train` is already corrupted.
    pub clean: Option<Dataset>,
}

fn with_role(mut ds: Dataset, role: Role) -> Dataset {
    ds.role = role;
    ds
}

fn conll_tagset(explicit: &Option<PathBuf>, files: &[&Path], opts: ConllOptions) -> Result<TagSet> {
    if let Some(p) = explicit {
        return read_tagset(p);
    }
    let mut labels = std::collections::BTreeSet::new();
    for f in files {
        labels.extend(conll_labels(&read_text(f)?, opts));
    }
    TagSet::with_default_background(labels.into_iter().collect())
        .map_err(|e| LabError::Format(format!("cannot infer a tag set: {e}")))
}

/// Generates (synthetic sources, with `seed`) or reads the splits.
pub fn load_splits(data: &DataSource, seed: u64) -> Result<Splits> {
    let from_synth = |s: ecn_core::synth::Splits| Splits {
        tagset: s.tagset,
        train: with_role(s.train, Role::Clean),
        gold: s.gold,
        test: s.test,
        clean: None,
    };
    match data {
        DataSource::SyntheticSequences(g) => {
            let cfg = ecn_core::synth::SeqGenConfig { seed, ..g.clone() };
            Ok(from_synth(gen_synthetic_sequences(&cfg).stage("generate sequences")?))
        }
        DataSource::SyntheticGrids(g) => {
            let cfg = ecn_core::synth::GridGenConfig { seed, ..g.clone() };
            Ok(from_synth(gen_synthetic_grids(&cfg).stage("generate grids")?))
        }
        DataSource::Conll { train, gold, test, clean, tagset, strip_bio } => {
            let opts = ConllOptions { strip_bio: *strip_bio };
            let mut files = vec![train.as_path(), gold.as_path(), test.as_path()];
            files.extend(clean.as_deref());
            let ts = conll_tagset(tagset, &files, opts)?;
            Ok(Splits {
                train: io::read_dataset(train, &ts, opts, Role::Corrupted)?,
                gold: io::read_dataset(gold, &ts, opts, Role::Gold)?,
                test: io::read_dataset(test, &ts, opts, Role::Test)?,
                clean: clean.as_deref().map(|p| io::read_dataset(p, &ts, opts, Role::Clean)).transpose()?,
                tagset: ts,
            })
        }
        DataSource::ConllCorpus { path, n_train, n_gold, n_test, tagset, strip_bio, split_seed } => {
            let opts = ConllOptions { strip_bio: *strip_bio };
            let ts = conll_tagset(tagset, &[path], opts)?;
            let all = io::read_dataset(path, &ts, opts, Role::Clean)?;
            let need = n_train + n_gold + n_test;
            if all.len() < need {
                return Err(LabError::Format(format!(
                    "{} holds {} sentences, the split needs {need}",
                    path.display(),
                    all.len()
                )));
            }
            let mut order: Vec<usize> = (0..all.len()).collect();
            SplitMix64::stream(*split_seed, &[STREAM_SPLIT]).shuffle(&mut order);
            let (a, rest) = order.split_at(*n_train);
            let (b, rest) = rest.split_at(*n_gold);
            Ok(Splits {
                train: with_role(all.select(a), Role::Clean),
                gold: with_role(all.select(b), Role::Gold),
                test: with_role(all.select(&rest[..*n_test]), Role::Test),
                clean: None,
                tagset: ts,
            })
        }
        DataSource::Grid { train, gold, test, clean, tagset } => {
            let ts = read_tagset(tagset)?;
            let opts = ConllOptions::default();
            Ok(Splits {
                train: io::read_dataset(train, &ts, opts, Role::Corrupted)?,
                gold: io::read_dataset(gold, &ts, opts, Role::Gold)?,
                test: io::read_dataset(test, &ts, opts, Role::Test)?,
                clean: clean.as_deref().map(|p| io::read_dataset(p, &ts, opts, Role::Clean)).transpose()?,
                tagset: ts,
            })
        }
    }
}

/// What the corruption did to one seed's training split.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionAudit {
    pub seed: u64,
    pub kind: &'static str,
    pub digest: String,
    pub changed_elements: usize,
    pub fraction: f64,
}

/// The datasets every strategy of one seed draws from.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub corrupted: Dataset,
    pub gold: Dataset,
    pub test: Dataset,
    pub clean: Option<Dataset>,
    pub audit: Option<CorruptionAudit>,
}

impl SeedData {
    pub fn baseline_data(&self) -> BaselineData<'_> {
        BaselineData { corrupted: &self.corrupted, gold: &self.gold, test: &self.test, clean: self.clean.as_ref() }
    }
}

/// Applies the config's corruption (seeded with `seed`) to the training split.
pub fn prepare_seed(cfg: &ExperimentConfig, splits: Splits, seed: u64) -> Result<SeedData> {
    let Some(kind) = &cfg.corruption else {
        let clean = splits.clean.or_else(|| (splits.train.role == Role::Clean).then(|| splits.train.clone()));
        return Ok(SeedData {
            corrupted: with_role(splits.train, Role::Corrupted),
            gold: splits.gold,
            test: splits.test,
            clean,
            audit: None,
        });
    };
    let spec = CorruptionSpec::new(kind.clone(), seed);
    let record = spec.apply(&splits.train).stage(format!("seed {seed}: corrupt"))?;
    let audit = CorruptionAudit {
        seed,
        kind: spec.kind_name(),
        digest: record.spec_digest.clone(),
        changed_elements: record.changed_elements(),
        fraction: record.corrupted_fraction(),
    };
    Ok(SeedData {
        corrupted: record.corrupted,
        gold: splits.gold,
        test: splits.test,
        clean: Some(with_role(splits.train, Role::Clean)),
        audit: Some(audit),
    })
}

/// Splits for every seed: generated per seed, or read once and shared.
pub fn seed_data(cfg: &ExperimentConfig) -> Result<Vec<SeedData>> {
    let synthetic = matches!(cfg.data, DataSource::SyntheticSequences(_) | DataSource::SyntheticGrids(_));
    let shared = if synthetic { None } else { Some(load_splits(&cfg.data, 0)?) };
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let splits = match &shared {
                Some(s) => s.clone(),
                None => load_splits(&cfg.data, seed)?,
            };
            prepare_seed(cfg, splits, seed)
        })
        .collect()
}

/// Wall-clock time of one training job.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub seed: u64,
    pub job: String,
    pub seconds: f64,
}

pub type SeedRun = (Vec<(Strategy, Evaluation)>, Vec<Timing>);

/// Scores of every requested strategy on one seed, plus timings. The
/// corrupted-data base model is trained once and shared.
pub fn run_seed(cfg: &ExperimentConfig, data: &SeedData, seed: u64, strategies: &[Strategy]) -> Result<SeedRun> {
    let pipeline = cfg.pipeline_for(seed);
    let spec = cfg.rs_for(seed);
    let bd = data.baseline_data();
    let mut timings = Vec::new();
    let f = if strategies.iter().any(|s| s.uses_corrupted_base()) {
        let t = Instant::now();
        let f = train_base(&data.corrupted, &pipeline.base).stage(format!("seed {seed}: train base model"))?;
        timings.push(Timing { seed, job: "base_model".into(), seconds: t.elapsed().as_secs_f64() });
        Some(f)
    } else {
        None
    };
    let results: Vec<(Strategy, Evaluation, Timing)> = strategies
        .par_iter()
        .map(|&s| {
            let t = Instant::now();
            let base = f.clone().filter(|_| s.uses_corrupted_base());
            let e = run_baseline_with(s, bd, &spec, &pipeline, base).stage(format!("seed {seed}: {}", s.as_str()))?;
            Ok((s, e, Timing { seed, job: s.as_str().into(), seconds: t.elapsed().as_secs_f64() }))
        })
        .collect::<Result<_>>()?;
    let mut evals = Vec::with_capacity(results.len());
    for (s, e, t) in results {
        evals.push((s, e));
        timings.push(t);
    }
    Ok((evals, timings))
}

/// Rows for every (seed, strategy, metric), in config order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn fmt_score(x: f64) -> String {
    format!("{x}")
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Format(format!("csv: {e}"))
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ResultTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RESULTS_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let runtime = r.runtime_s.map(fmt_score).unwrap_or_default();
            w.write_record([
                r.dataset.as_str(),
                r.strategy.as_str(),
                r.metric.as_str(),
                &fmt_score(r.score),
                &r.seed.to_string(),
                &runtime,
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Format(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.clone();
        if header.iter().ne(RESULTS_HEADER) {
            return Err(LabError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header {}", RESULTS_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let bad = |m: String| LabError::Parse { path: path.to_path_buf(), line, message: m };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(format!("bad number {:?}", &rec[k])));
            rows.push(ResultRow {
                dataset: rec[0].to_string(),
                strategy: Strategy::parse(&rec[1]).map_err(|e| bad(e.to_string()))?,
                metric: rec[2].to_string(),
                score: num(3)?,
                seed: rec[4].parse().map_err(|_| bad(format!("bad seed {:?}", &rec[4])))?,
                runtime_s: if rec[5].is_empty() { None } else { Some(num(5)?) },
            });
        }
        Ok(Self { rows })
    }

    fn distinct<T: PartialEq + Clone>(&self, f: impl Fn(&ResultRow) -> T) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for r in &self.rows {
            let v = f(r);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn scores(&self, dataset: &str, strategy: Strategy, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.dataset == dataset && r.strategy == strategy && r.metric == metric)
            .map(|r| r.score)
            .collect()
    }

    /// Mean over seeds, if the cell exists.
    pub fn mean(&self, dataset: &str, strategy: Strategy, metric: &str) -> Option<f64> {
        let s = self.scores(dataset, strategy, metric);
        (!s.is_empty()).then(|| mean_std(&s).0)
    }

    /// One table per metric: datasets as rows, strategies as columns in the
    /// canonical order, cells `mean ± std` over seeds.
    pub fn to_markdown(&self) -> String {
        let mut strategies = self.distinct(|r| r.strategy);
        strategies.sort_by_key(|s| Strategy::ALL.iter().position(|a| a == s));
        let datasets = self.distinct(|r| r.dataset.clone());
        let mut out = String::new();
        for metric in self.distinct(|r| r.metric.clone()) {
            let seeds = self.rows.iter().filter(|r| r.metric == metric).map(|r| r.seed).collect::<Vec<_>>();
            let n_seeds = {
                let mut s = seeds.clone();
                s.sort_unstable();
                s.dedup();
                s.len()
            };
            let _ = writeln!(out, "### {metric} (mean ± std over {n_seeds} seed(s))\n");
            let _ = write!(out, "| Dataset |");
            for s in &strategies {
                let _ = write!(out, " {} |", column_name(*s));
            }
            out.push_str("\n|---|");
            out.push_str(&"---:|".repeat(strategies.len()));
            out.push('\n');
            for d in &datasets {
                let _ = write!(out, "| {d} |");
                for s in &strategies {
                    let xs = self.scores(d, *s, &metric);
                    if xs.is_empty() {
                        out.push_str(" - |");
                    } else {
                        let (m, sd) = mean_std(&xs);
                        let _ = write!(out, " {m:.3} ± {sd:.3} |");
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

pub fn column_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Clean => "Clean",
        Strategy::CorruptedOnly => "Corrupted",
        Strategy::GoldOnly => "Gold",
        Strategy::Combined => "Combined",
        Strategy::Pseudolabel => "Pseudo",
        Strategy::EcnXOnly => "ECN X",
        Strategy::EcnYOnly => "ECN y",
        Strategy::EcnFull => "ECN Full",
    }
}

/// Everything one experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub timings: Vec<Timing>,
    pub audits: Vec<CorruptionAudit>,
}

/// Worker pool capped by `ECN_LAB_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| LabError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| LabError::Format(format!("thread pool: {e}")))
}

/// Generate or load, corrupt, run every strategy for every seed, score.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    thread_pool()?.install(|| run_experiment_in_pool(cfg))
}

fn run_experiment_in_pool(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let data = seed_data(cfg)?;
    let per_seed: Vec<_> = cfg
        .seeds
        .par_iter()
        .zip(&data)
        .map(|(&seed, d)| run_seed(cfg, d, seed, &cfg.strategies))
        .collect::<Result<_>>()?;
    let mut out = ExperimentOutput { table: ResultTable::default(), timings: Vec::new(), audits: Vec::new() };
    for ((&seed, d), (evals, timings)) in cfg.seeds.iter().zip(&data).zip(per_seed) {
        for (s, e) in &evals {
            out.table.rows.extend(result_rows(&cfg.name, *s, seed, e));
        }
        out.timings.extend(timings);
        out.audits.extend(d.audit.clone());
    }
    Ok(out)
}

/// Creates `<out_dir>/<name>-<UTC timestamp>`, adding `-2`, `-3`, ... when
/// the directory already exists. Never reuses a directory.
pub fn create_run_dir(out_dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| LabError::io(out_dir, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for n in 1.. {
        let dir =
            if n == 1 { out_dir.join(format!("{name}-{stamp}")) } else { out_dir.join(format!("{name}-{stamp}-{n}")) };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(LabError::io(&dir, e)),
        }
    }
    unreachable!()
}

pub fn timings_csv(timings: &[Timing]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "job", "seconds"]).map_err(csv_err)?;
    for t in timings {
        w.write_record([t.seed.to_string(), t.job.clone(), format!("{:.3}", t.seconds)]).map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| LabError::Format(e.to_string()))?).expect("UTF-8"))
}

pub fn audits_csv(audits: &[CorruptionAudit]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "kind", "spec_digest", "changed_elements", "changed_fraction"]).map_err(csv_err)?;
    for a in audits {
        w.write_record([
            a.seed.to_string(),
            a.kind.to_string(),
            a.digest.clone(),
            a.changed_elements.to_string(),
            fmt_score(a.fraction),
        ])
        .map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| LabError::Format(e.to_string()))?).expect("UTF-8"))
}

/// Writes `config.json`, `results.csv`, `results.md`, `corruption.csv` and
/// `timings.csv` into `dir`.
pub fn write_experiment(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    io::write_text(&dir.join("config.json"), &(cfg.to_json() + "\n"))?;
    io::write_text(&dir.join("results.csv"), &out.table.to_csv()?)?;
    io::write_text(&dir.join("results.md"), &out.table.to_markdown())?;
    io::write_text(&dir.join("corruption.csv"), &audits_csv(&out.audits)?)?;
    io::write_text(&dir.join("timings.csv"), &timings_csv(&out.timings)?)
}

/// Runs the experiment and writes a fresh run directory under `out_dir`.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<(PathBuf, ExperimentOutput)> {
    let out = run_experiment(cfg)?;
    let dir = create_run_dir(&cfg.out_dir, &cfg.name)?;
    write_experiment(&dir, cfg, &out)?;
    Ok((dir, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dataset: &str, strategy: Strategy, metric: &str, score: f64, seed: u64) -> ResultRow {
        ResultRow { dataset: dataset.into(), strategy, metric: metric.into(), score, seed, runtime_s: None }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let t = ResultTable {
            rows: vec![
                row("d", Strategy::Clean, "weighted_f1", 0.9, 0),
                ResultRow { runtime_s: Some(1.25), ..row("d", Strategy::EcnFull, "macro_f1", 1.0 / 3.0, 7) },
            ],
        };
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("dataset,strategy,metric,score,seed,runtime_s\n"));
        assert!(text.contains("d,clean,weighted_f1,0.9,0,\n"));
        assert_eq!(ResultTable::from_csv(&text, Path::new("r.csv")).unwrap(), t);
        assert!(ResultTable::from_csv("a,b\n", Path::new("r.csv")).is_err());
    }

    #[test]
    fn markdown_orders_columns_and_aggregates() {
        let t = ResultTable {
            rows: vec![
                row("d", Strategy::EcnFull, "weighted_f1", 0.8, 0),
                row("d", Strategy::Clean, "weighted_f1", 0.9, 0),
                row("d", Strategy::EcnFull, "weighted_f1", 0.6, 1),
                row("d", Strategy::Clean, "weighted_f1", 0.9, 1),
            ],
        };
        let md = t.to_markdown();
        assert!(md.contains("| Dataset | Clean | ECN Full |"), "{md}");
        assert!(md.contains("| d | 0.900 ± 0.000 | 0.700 ± 0.141 |"), "{md}");
        assert!(md.contains("over 2 seed(s)"));
        assert_eq!(t.mean("d", Strategy::EcnFull, "weighted_f1"), Some(0.7));
        assert_eq!(t.mean("d", Strategy::GoldOnly, "weighted_f1"), None);
    }

    #[test]
    fn run_dirs_are_never_reused() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("runs");
        let a = create_run_dir(&out, "x").unwrap();
        let b = create_run_dir(&out, "x").unwrap();
        assert_ne!(a, b);
        assert!(a.starts_with(&out) && b.starts_with(&out));
    }
}
