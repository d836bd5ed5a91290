use ecn_core::base::{evaluate, train_base};
use ecn_core::baselines::Strategy;
use ecn_core::corruption::{CorruptionKind, ImpreciseMode};
use ecn_core::synth::{gen_synthetic_sequences, SeqGenConfig};
use ecn_lab::config::{DataSource, ExperimentConfig, SweepAxis, SweepConfig};
use ecn_lab::io;
use ecn_lab::runner::{run_and_write, run_experiment};
use ecn_lab::sweep::run_sweep;

fn small_gen() -> SeqGenConfig {
    SeqGenConfig { n_train: 120, n_gold: 20, n_test: 40, ..SeqGenConfig::default() }
}

fn small(strategies: Vec<Strategy>, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(r#"{"name":"small","data":{"source":"synthetic_sequences"}}"#).unwrap();
    cfg.data = DataSource::SyntheticSequences(small_gen());
    cfg.corruption = Some(CorruptionKind::Imprecise { mode: ImpreciseMode::Fixed });
    cfg.strategies = strategies;
    cfg.seeds = seeds;
    cfg.pipeline.base.crf.steps = 200;
    cfg.pipeline.ecn.train.steps = 150;
    cfg
}

#[test]
fn clean_only_equals_a_direct_clean_run() {
    let mut cfg = small(vec![Strategy::Clean], vec![5]);
    cfg.corruption = None;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.table.rows.len(), 2);
    let s = gen_synthetic_sequences(&SeqGenConfig { seed: 5, ..small_gen() }).unwrap();
    let f = train_base(&s.train, &cfg.pipeline_for(5).base).unwrap();
    let e = evaluate(&f, &s.test).unwrap();
    let w = &out.table.rows[0];
    assert_eq!((w.strategy, w.metric.as_str(), w.seed), (Strategy::Clean, "weighted_f1", 5));
    assert_eq!(w.score, e.weighted);
    assert_eq!(out.table.rows[1].score, e.macro_avg);
    assert!(out.audits.is_empty());
}

#[test]
fn seeds_multiply_rows_and_reruns_are_byte_identical() {
    let cfg = small(vec![Strategy::CorruptedOnly, Strategy::GoldOnly, Strategy::EcnYOnly], vec![0, 1]);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.table.rows.len(), 2 * 3 * 2);
    for s in &cfg.strategies {
        for seed in [0, 1] {
            assert_eq!(a.table.rows.iter().filter(|r| r.strategy == *s && r.seed == seed).count(), 2);
        }
    }
    assert_eq!(a.table.to_csv().unwrap(), b.table.to_csv().unwrap());
    assert_eq!(a.audits.len(), 2);
    assert_ne!(a.audits[0].digest, a.audits[1].digest);
}

#[test]
fn file_source_matches_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen_synthetic_sequences(&SeqGenConfig { seed: 0, ..small_gen() }).unwrap();
    for (name, ds) in [("train", &s.train), ("gold", &s.gold), ("test", &s.test)] {
        io::write_dataset(ds, &dir.path().join(format!("{name}.conll"))).unwrap();
    }
    io::write_tagset(&s.tagset, &dir.path().join("tagset.txt")).unwrap();
    let synthetic = small(vec![Strategy::CorruptedOnly, Strategy::EcnFull], vec![0]);
    let mut files = synthetic.clone();
    files.data = ExperimentConfig::from_json(
        r#"{"name":"f","data":{"source":"conll","train":"train.conll","gold":"gold.conll","test":"test.conll","tagset":"tagset.txt"}}"#,
    )
    .unwrap()
    .data;
    files.resolve_paths(dir.path());
    files.validate().unwrap();
    let a = run_experiment(&synthetic).unwrap();
    let b = run_experiment(&files).unwrap();
    assert_eq!(a.table, b.table);
    assert_eq!(a.audits, b.audits);
}

#[test]
fn run_directories_hold_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(vec![Strategy::CorruptedOnly], vec![0]);
    cfg.out_dir = dir.path().join("runs");
    let (a, out) = run_and_write(&cfg).unwrap();
    let (b, _) = run_and_write(&cfg).unwrap();
    assert_ne!(a, b);
    for f in ["config.json", "results.csv", "results.md", "corruption.csv", "timings.csv"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert!(a.starts_with(&cfg.out_dir));
    let csv = std::fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv, out.table.to_csv().unwrap());
    assert_eq!(csv, std::fs::read_to_string(b.join("results.csv")).unwrap());
    let saved = ExperimentConfig::load(&a.join("config.json")).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn stage_errors_name_the_stage() {
    let mut cfg = small(vec![Strategy::GoldOnly], vec![0]);
    if let DataSource::SyntheticSequences(g) = &mut cfg.data {
        g.n_gold = 0;
    }
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("gold_only"), "{err}");
}

#[test]
fn sweep_runs_each_value_once_per_seed() {
    let sweep = SweepConfig {
        name: "s".into(),
        axis: SweepAxis::NeighborRadiusK,
        values: vec![0, 2],
        base: small(vec![], vec![0]),
        focus_class: Some("GEO".into()),
        variant: None,
    };
    let a = run_sweep(&sweep).unwrap();
    let t = &a.table;
    assert_eq!(t.points.len(), 4);
    assert_eq!(t.metric, "f1_GEO");
    assert_eq!(t.points.iter().filter(|p| p.value.is_none()).count(), 2);
    assert_eq!(t.points.iter().filter(|p| p.strategy == Strategy::EcnYOnly).count(), 2);
    assert_eq!(run_sweep(&sweep).unwrap().table.to_csv().unwrap(), t.to_csv().unwrap());

    let bad = SweepConfig { focus_class: Some("CITY".into()), ..sweep };
    assert_eq!(run_sweep(&bad).unwrap_err().exit_code(), 1);
}
