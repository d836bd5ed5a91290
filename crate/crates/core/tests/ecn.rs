//! Relevant-subset construction, corrector training and correction.

use std::sync::OnceLock;

use ecn_core::base::{evaluate, evaluate_labels, train_base, BaseConfig, BaseModel};
use ecn_core::corruption::{CorruptionKind, CorruptionSpec, ImpreciseMode};
use ecn_core::data::{Dataset, FeatureValue, Role, SequenceSample};
use ecn_core::ecn::*;
use ecn_core::features::FEATURE_COUNT;
use ecn_core::optim::TrainConfig;
use ecn_core::synth::*;

struct SeqFixture {
    splits: Splits,
    corrupted: Dataset,
    cfg: PipelineConfig,
    f: BaseModel,
}

fn seq_fixture() -> &'static SeqFixture {
    static FIX: OnceLock<SeqFixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let gen = SeqGenConfig { n_train: 800, n_gold: 60, n_test: 200, seed: 3, ..SeqGenConfig::default() };
        let splits = gen_synthetic_sequences(&gen).unwrap();
        let spec = CorruptionSpec::new(CorruptionKind::Imprecise { mode: ImpreciseMode::Fixed }, 3);
        let corrupted = spec.apply(&splits.train).unwrap().corrupted;
        let mut cfg = PipelineConfig::default().with_seed(3);
        cfg.base.crf.steps = 2000;
        let f = train_base(&corrupted, &cfg.base).unwrap();
        SeqFixture { splits, corrupted, cfg, f }
    })
}

fn sentence(tokens: &[&str], labels: &[usize]) -> Dataset {
    Dataset::sequences(sequence_tagset(), vec![SequenceSample::from_strs(tokens, labels)], Role::Test)
}

fn slot<'a>(input: &'a RsInput, name: &str) -> &'a FeatureValue {
    match input {
        RsInput::Slots(s) => &s.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no slot {name}")).1,
        RsInput::Dense(_) => panic!("dense input"),
    }
}

#[test]
fn edge_neighbours_are_invalid() {
    let ds = sentence(&["a", "b", "c", "d", "e"], &[0, 1, 1, 0, 0]);
    let yhat = [0, 1, 1, 0, 2];
    let spec = RelevantSubsetSpec { radius: 3, ..RelevantSubsetSpec::default() };
    let input = build_rs_sample(&ds, 0, Yhat::Hard(&yhat), 0, &spec).unwrap();
    for off in ["n-3", "n-2", "n-1"] {
        assert_eq!(slot(&input, off), &FeatureValue::Str(INVALID_SYMBOL.into()));
    }
    assert_eq!(slot(&input, "n+1"), &FeatureValue::Str("GEO".into()));
    assert_eq!(slot(&input, "n+3"), &FeatureValue::Str("O".into()));
    assert_eq!(slot(&input, "y"), &FeatureValue::Str("O".into()));
}

#[test]
fn radius_zero_full_is_yhat_plus_features() {
    let ds = sentence(&["In", "Poland", "."], &[0, 1, 0]);
    let yhat = [0, 1, 0];
    let spec = RelevantSubsetSpec { radius: 0, ..RelevantSubsetSpec::default() };
    let RsInput::Slots(slots) = build_rs_sample(&ds, 0, Yhat::Hard(&yhat), 1, &spec).unwrap() else {
        panic!("dense input");
    };
    assert_eq!(slots.len(), 1 + FEATURE_COUNT);
    assert_eq!(slots[0], ("y".into(), FeatureValue::Str("GEO".into())));
    assert!(slots[1..].iter().all(|(n, _)| n.starts_with("x:")));
    assert_eq!(slots[1].1, FeatureValue::Str("poland".into()));
}

#[test]
fn suppressed_blocks_are_filled() {
    let ds = sentence(&["In", "Poland", "."], &[0, 1, 0]);
    let yhat = [0, 1, 0];
    let y_only = RelevantSubsetSpec { variant: RsVariant::YOnly, radius: 1, ..RelevantSubsetSpec::default() };
    let input = build_rs_sample(&ds, 0, Yhat::Hard(&yhat), 1, &y_only).unwrap();
    assert_eq!(slot(&input, "x:lower"), &FeatureValue::Str(INVALID_SYMBOL.into()));
    assert_eq!(slot(&input, "n-1"), &FeatureValue::Str("O".into()));

    let x_only = RelevantSubsetSpec {
        variant: RsVariant::XOnly,
        radius: 1,
        ablation_fill: AblationFill::RandomFloats,
        ..RelevantSubsetSpec::default()
    };
    let input = build_rs_sample(&ds, 0, Yhat::Hard(&yhat), 1, &x_only).unwrap();
    let FeatureValue::Num(v) = slot(&input, "n+1") else { panic!("not a float") };
    assert!((0.0..1.0).contains(v));
    assert_eq!(slot(&input, "x:lower"), &FeatureValue::Str("poland".into()));
    assert_eq!(input, build_rs_sample(&ds, 0, Yhat::Hard(&yhat), 1, &x_only).unwrap());
}

#[test]
fn input_width_is_constant() {
    let fx = seq_fixture();
    let pred = fx.f.predict(&fx.splits.gold).unwrap();
    for variant in [RsVariant::XOnly, RsVariant::YOnly, RsVariant::Full] {
        let spec = RelevantSubsetSpec { variant, ..RelevantSubsetSpec::default() };
        let width = spec.input_width(fx.splits.tagset.len(), true);
        for i in 0..5 {
            for j in 0..fx.splits.gold.labels_of(i).len() {
                let input = build_rs_sample(&fx.splits.gold, i, Yhat::Hard(&pred.labels[i]), j, &spec).unwrap();
                assert_eq!(input.len(), width);
            }
        }
    }
}

#[test]
fn out_of_range_element_is_rejected() {
    let ds = sentence(&["a", "b"], &[0, 0]);
    let spec = RelevantSubsetSpec::default();
    assert!(build_rs_sample(&ds, 0, Yhat::Hard(&[0, 0]), 2, &spec).is_err());
    assert!(build_rs_sample(&ds, 0, Yhat::Hard(&[0]), 0, &spec).is_err());
}

#[test]
fn grid_x_only_random_fill() {
    let cfg = GridGenConfig { n_train: 1, n_gold: 1, n_test: 1, ..GridGenConfig::default() };
    let ds = gen_synthetic_grids(&cfg).unwrap().train;
    let g = &ds.as_grids().unwrap()[0];
    let yhat: Vec<Vec<f64>> = g.labels.iter().map(|&l| ds.tagset.one_hot(l)).collect();
    let spec = RelevantSubsetSpec {
        variant: RsVariant::XOnly,
        window: 5,
        ablation_fill: AblationFill::RandomFloats,
        ..RelevantSubsetSpec::default()
    };
    let j = 10 * g.width + 10;
    let RsInput::Dense(x) = build_rs_sample(&ds, 0, Yhat::Soft(&yhat), j, &spec).unwrap() else { panic!("slots") };
    assert_eq!(x.len(), spec.input_width(3, false));
    let (y_block, px_block) = x.split_at(25 * 3);
    assert!(y_block.iter().all(|v| (0.0..1.0).contains(v)));
    assert!(y_block.iter().any(|&v| v != 0.0 && v != 1.0));
    // Centre pixel of the window, centred colors.
    let centre = &px_block[12 * 3..13 * 3];
    for (c, p) in centre.iter().zip(g.pixels[j]) {
        assert!((c - (p - 0.5)).abs() < 1e-12);
    }
    let again = build_rs_sample(&ds, 0, Yhat::Soft(&yhat), j, &spec).unwrap();
    assert_eq!(RsInput::Dense(x), again);
}

#[test]
fn each_step_emits_batch_times_length_pairs() {
    let toks: Vec<String> = (0..7).map(|i| format!("w{i}")).collect();
    let samples: Vec<SequenceSample> =
        (0..10).map(|i| SequenceSample::new(toks.clone(), vec![usize::from(i % 3 == 0); 7])).collect();
    let gold = Dataset::sequences(sequence_tagset(), samples, Role::Gold);
    let base_cfg = BaseConfig { crf: TrainConfig { steps: 20, ..TrainConfig::default() }, ..BaseConfig::default() };
    let f = train_base(&gold, &base_cfg).unwrap();
    let cfg = EcnTrainConfig {
        train: TrainConfig { steps: 12, batch_size: 4, ..TrainConfig::default() },
        ..Default::default()
    };
    let mut counts = Vec::new();
    ecn_train_observed(&f, &gold, &RelevantSubsetSpec::default(), &cfg, |s| counts.push(s.samples)).unwrap();
    assert_eq!(counts, vec![4 * 7; 12]);
}

#[test]
fn empty_gold_is_rejected() {
    let fx = seq_fixture();
    let empty = fx.splits.gold.select(&[]);
    assert!(ecn_train(&fx.f, &empty, &RelevantSubsetSpec::default(), &fx.cfg.ecn).is_err());
}

#[test]
fn error_free_gold_learns_identity() {
    let fx = seq_fixture();
    let clean_f = train_base(&fx.splits.train, &fx.cfg.base).unwrap();
    // Gold labels replaced by f's own predictions: nothing to correct.
    let gold = fx.splits.gold.with_labels(clean_f.predict_labels(&fx.splits.gold).unwrap(), Role::Gold).unwrap();
    let g = ecn_train(&clean_f, &gold, &RelevantSubsetSpec::default(), &fx.cfg.ecn).unwrap();
    let corrected = ecn_correct(&clean_f, &g, &fx.splits.test).unwrap();
    let pred = clean_f.predict_labels(&fx.splits.test).unwrap();
    let (mut same, mut total) = (0, 0);
    for (i, p) in pred.iter().enumerate() {
        for (a, b) in p.iter().zip(corrected.labels_of(i)) {
            same += (a == b) as usize;
            total += 1;
        }
    }
    assert!(same as f64 / total as f64 >= 0.99, "agreement {same}/{total}");
}

#[test]
fn training_leaves_f_untouched_and_is_deterministic() {
    let fx = seq_fixture();
    let before = fx.f.clone();
    let spec = RelevantSubsetSpec::default();
    let a = ecn_train(&fx.f, &fx.splits.gold, &spec, &fx.cfg.ecn).unwrap();
    let b = ecn_train(&fx.f, &fx.splits.gold, &spec, &fx.cfg.ecn).unwrap();
    assert_eq!(before, fx.f);
    assert_eq!(a, b);
}

#[test]
fn correction_changes_only_labels() {
    let fx = seq_fixture();
    let g = ecn_train(&fx.f, &fx.splits.gold, &RelevantSubsetSpec::default(), &fx.cfg.ecn).unwrap();
    let small = fx.corrupted.select(&(0..50).collect::<Vec<_>>());
    let out = ecn_correct(&fx.f, &g, &small).unwrap();
    assert_eq!(out.role, Role::Corrupted);
    for (a, b) in small.as_sequences().unwrap().iter().zip(out.as_sequences().unwrap()) {
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.features, b.features);
    }
}

#[test]
fn y_only_corrector_beats_its_input_on_held_out_data() {
    let fx = seq_fixture();
    let spec = RelevantSubsetSpec { variant: RsVariant::YOnly, radius: 3, ..RelevantSubsetSpec::default() };
    let g = ecn_train(&fx.f, &fx.splits.gold, &spec, &fx.cfg.ecn).unwrap();
    let test = &fx.splits.test;
    let yhat = test.with_labels(fx.f.predict_labels(test).unwrap(), Role::Test).unwrap();
    let corrected = ecn_correct(&fx.f, &g, test).unwrap();
    let before = evaluate_labels(&yhat, test).unwrap().weighted;
    let after = evaluate_labels(&corrected, test).unwrap().weighted;
    assert!(after > before, "{before} -> {after}");
}

#[test]
fn over_extended_span_is_trimmed() {
    let fx = seq_fixture();
    let spec = RelevantSubsetSpec { variant: RsVariant::YOnly, radius: 3, ..RelevantSubsetSpec::default() };
    let g = ecn_train(&fx.f, &fx.splits.gold, &spec, &fx.cfg.ecn).unwrap();
    let geo = fx.splits.tagset.index_of("GEO").unwrap();
    // First test sentence with a one-token GEO entity followed by three O.
    let test = &fx.splits.test;
    let (i, j) = (0..test.len())
        .find_map(|i| {
            let t = test.labels_of(i);
            (0..t.len().saturating_sub(3))
                .find(|&j| t[j] == geo && (j == 0 || t[j - 1] != geo) && t[j + 1..j + 4].iter().all(|&l| l == 0))
                .map(|j| (i, j))
        })
        .unwrap();
    let toy = test.select(&[i]);
    let corruption = CorruptionSpec::new(CorruptionKind::Imprecise { mode: ImpreciseMode::Fixed }, 0);
    let corrupted = corruption.apply(&toy).unwrap().corrupted;
    assert_eq!(&corrupted.labels_of(0)[j..j + 4], &[geo; 4]);
    let out = ecn_correct(&fx.f, &g, &corrupted).unwrap();
    assert_eq!(&out.labels_of(0)[j..j + 4], &[geo, 0, 0, 0]);
}

#[test]
fn pipeline_is_deterministic_and_improves_on_corrupted() {
    let fx = seq_fixture();
    let spec = RelevantSubsetSpec::default();
    let a =
        ecn_pipeline_with_base(fx.f.clone(), &fx.corrupted, &fx.splits.gold, &fx.splits.test, &spec, &fx.cfg).unwrap();
    let b =
        ecn_pipeline_with_base(fx.f.clone(), &fx.corrupted, &fx.splits.gold, &fx.splits.test, &spec, &fx.cfg).unwrap();
    assert_eq!(a.evaluation, b.evaluation);
    let corrupted_only = evaluate(&fx.f, &fx.splits.test).unwrap();
    assert!(a.evaluation.weighted > corrupted_only.weighted);
}

#[test]
fn uncorrupted_pipeline_matches_clean() {
    // Enough gold that every class is represented.
    let gen = SeqGenConfig { n_train: 800, n_gold: 200, n_test: 200, seed: 3, ..SeqGenConfig::default() };
    let splits = gen_synthetic_sequences(&gen).unwrap();
    let cfg = &seq_fixture().cfg;
    let clean = evaluate(&train_base(&splits.train, &cfg.base).unwrap(), &splits.test).unwrap();
    let out = ecn_pipeline(&splits.train, &splits.gold, &splits.test, &RelevantSubsetSpec::default(), cfg).unwrap();
    assert!(
        (out.evaluation.weighted - clean.weighted).abs() <= 0.02,
        "{} vs {}",
        out.evaluation.weighted,
        clean.weighted
    );
}

fn grid_fixture() -> (Splits, BaseModel, PipelineConfig) {
    let cfg = GridGenConfig { n_train: 40, n_gold: 6, n_test: 6, seed: 2, ..GridGenConfig::default() };
    let splits = gen_synthetic_grids(&cfg).unwrap();
    let mut pc = PipelineConfig::default().with_seed(2);
    pc.base.patch.train.steps = 300;
    pc.ecn.train =
        TrainConfig { steps: 20, batch_size: 1, learning_rate: 0.1, l1: 0.0, l2: 0.0, ..TrainConfig::default() };
    let f = train_base(&splits.train, &pc.base).unwrap();
    (splits, f, pc)
}

#[test]
fn whole_image_border_keeps_predictions() {
    let (splits, f, mut pc) = grid_fixture();
    pc.ecn.border = Some(16);
    let g = ecn_train(&f, &splits.gold, &RelevantSubsetSpec::default(), &pc.ecn).unwrap();
    let out = ecn_correct(&f, &g, &splits.test).unwrap();
    let pred = f.predict_labels(&splits.test).unwrap();
    for (i, p) in pred.iter().enumerate() {
        assert_eq!(out.labels_of(i), p.as_slice());
    }
    for (a, b) in splits.test.as_grids().unwrap().iter().zip(out.as_grids().unwrap()) {
        assert_eq!(a.pixels, b.pixels);
    }
}

#[test]
fn grid_border_defaults_to_half_window() {
    let (splits, f, pc) = grid_fixture();
    let spec = RelevantSubsetSpec { window: 7, ..RelevantSubsetSpec::default() };
    let g = ecn_train(&f, &splits.gold, &spec, &pc.ecn).unwrap();
    assert_eq!(g.border, 4);
}
