//! Seeded statistics and exhaustive audits of the corruption injectors.

use ecn_core::corruption::*;
use ecn_core::data::{dataset_stats, Dataset, Role, SequenceSample, TagSet};
use ecn_core::synth::*;

fn corpus(n: usize, seed: u64) -> Dataset {
    let cfg = SeqGenConfig { n_train: n, n_gold: 1, n_test: 1, seed, ..SeqGenConfig::default() };
    gen_synthetic_sequences(&cfg).unwrap().train
}

/// Label runs counted directly from boundaries.
fn count_runs(ds: &Dataset) -> usize {
    let bg = ds.tagset.background();
    (0..ds.len())
        .map(|i| {
            let l = ds.labels_of(i);
            (0..l.len()).filter(|&j| l[j] != bg && (j == 0 || l[j - 1] != l[j])).count()
        })
        .sum()
}

#[test]
fn span_count_matches_run_boundaries() {
    let ds = corpus(500, 4);
    assert_eq!(find_entity_spans(&ds).unwrap().len(), count_runs(&ds));
}

#[test]
fn missing_random_drops_thirty_percent_of_spans() {
    let ds = corpus(3000, 11);
    let spans = find_entity_spans(&ds).unwrap();
    assert!(spans.len() >= 5000, "only {} spans", spans.len());
    let rec = corrupt_missing_random(&ds, 0.3, 5).unwrap();
    let bg = ds.tagset.background();
    let mut dropped = 0;
    for s in &spans {
        let out = &rec.corrupted.labels_of(s.sample_index)[s.start..s.end];
        let all_bg = out.iter().all(|&l| l == bg);
        let kept = out.iter().all(|&l| l == s.label);
        assert!(all_bg || kept, "span partially dropped: {s:?}");
        dropped += all_bg as usize;
    }
    let rate = dropped as f64 / spans.len() as f64;
    assert!((rate - 0.30).abs() <= 0.02, "drop rate {rate}");
}

#[test]
fn imprecise_fixed_audit() {
    let ds = corpus(2000, 12);
    let rec = corrupt_imprecise(&ds, ImpreciseMode::Fixed, 9).unwrap();
    let bg = ds.tagset.background();
    let (mut full, mut clamped) = (0, 0);
    for i in 0..ds.len() {
        let truth = &rec.true_labels[i];
        assert_eq!(truth.as_slice(), ds.labels_of(i));
        let mut expected = truth.clone();
        let mut j = 0;
        while j < truth.len() {
            if truth[j] == bg {
                j += 1;
                continue;
            }
            let label = truth[j];
            while j < truth.len() && truth[j] == label {
                j += 1;
            }
            let mut ext = 0;
            while ext < 3 && j + ext < truth.len() && truth[j + ext] == bg {
                expected[j + ext] = label;
                ext += 1;
            }
            if ext == 3 {
                full += 1;
            } else {
                clamped += 1;
            }
        }
        assert_eq!(rec.corrupted.labels_of(i), expected.as_slice(), "sample {i}");
    }
    assert!(full > 0 && clamped > 0);
}

#[test]
fn imprecise_fixed_poland() {
    let ts = TagSet::from_names(&["O", "GEO"], 0).unwrap();
    let toks = ["A", "court", "in", "Poland", "has", "fined", "the", "magazine", "publisher", "."];
    let mut labels = vec![0; toks.len()];
    labels[3] = 1;
    let ds = Dataset::sequences(ts, vec![SequenceSample::from_strs(&toks, &labels)], Role::Clean);
    let rec = corrupt_imprecise(&ds, ImpreciseMode::Fixed, 0).unwrap();
    let geo: Vec<&str> =
        toks.iter().zip(rec.corrupted.labels_of(0)).filter(|(_, &l)| l == 1).map(|(t, _)| *t).collect();
    assert_eq!(geo, ["Poland", "has", "fined", "the"]);
}

#[test]
fn random_half_selects_half_the_spans() {
    let ds = corpus(6000, 13);
    let spans = find_entity_spans(&ds).unwrap();
    assert!(spans.len() >= 10_000, "only {} spans", spans.len());
    let rec = corrupt_imprecise(&ds, ImpreciseMode::RandomHalf, 3).unwrap();
    let bg = ds.tagset.background();
    // A span is visibly selected when it had a background token after it.
    let (mut eligible, mut extended) = (0, 0);
    for s in &spans {
        let truth = ds.labels_of(s.sample_index);
        if s.end < truth.len() && truth[s.end] == bg {
            eligible += 1;
            extended += (rec.corrupted.labels_of(s.sample_index)[s.end] == s.label) as usize;
        }
    }
    let rate = extended as f64 / eligible as f64;
    assert!((rate - 0.5).abs() <= 0.02, "selected fraction {rate}");
}

#[test]
fn variable_extensions_are_one_to_three() {
    let ds = corpus(1000, 14);
    let rec = corrupt_imprecise(&ds, ImpreciseMode::Variable, 8).unwrap();
    let bg = ds.tagset.background();
    let mut seen = [0usize; 4];
    for s in find_entity_spans(&ds).unwrap() {
        let truth = ds.labels_of(s.sample_index);
        let out = rec.corrupted.labels_of(s.sample_index);
        let room = truth[s.end..].iter().take_while(|&&l| l == bg).count();
        let ext = (s.end..truth.len()).take_while(|&j| truth[j] == bg && out[j] == s.label).count();
        assert!(ext <= 3 && ext <= room);
        if room >= 3 {
            assert!(ext >= 1);
            seen[ext] += 1;
        }
    }
    assert!(seen[1] > 0 && seen[2] > 0 && seen[3] > 0);
}

#[test]
fn grid_misclassify_flips_half_the_images() {
    let cfg = GridGenConfig { n_train: 400, n_gold: 1, n_test: 1, seed: 21, ..GridGenConfig::default() };
    let ds = gen_synthetic_grids(&cfg).unwrap().train;
    let rec = corrupt_grid_misclassify(&ds, 0.5, GRID_VEHICLE, GRID_ROAD, 6).unwrap();
    let mut flipped = 0;
    for i in 0..ds.len() {
        let (before, after) = (ds.labels_of(i), rec.corrupted.labels_of(i));
        let changed = before != after;
        if changed {
            for (&b, &a) in before.iter().zip(after) {
                if b == GRID_VEHICLE {
                    assert_eq!(a, GRID_ROAD);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
        flipped += changed as usize;
    }
    let rate = flipped as f64 / ds.len() as f64;
    assert!((rate - 0.5).abs() <= 0.05, "flipped fraction {rate}");
}

#[test]
fn grid_misclassify_total_flip() {
    let cfg = GridGenConfig { n_train: 20, n_gold: 1, n_test: 1, ..GridGenConfig::default() };
    let ds = gen_synthetic_grids(&cfg).unwrap().train;
    let rec = corrupt_grid_misclassify(&ds, 1.0, GRID_VEHICLE, GRID_ROAD, 0).unwrap();
    let stats = dataset_stats(&rec.corrupted).unwrap();
    assert_eq!(stats.count(&ds.tagset, "vehicle"), 0);
}

#[test]
fn missing_systematic_rate_on_synthetic_corpus() {
    let ds = corpus(2000, 15);
    let rec = corrupt_missing_systematic(&ds, &BuiltinWeakTagger::default()).unwrap();
    let bg = ds.tagset.background();
    let entity_tokens: usize = (0..ds.len()).map(|i| ds.labels_of(i).iter().filter(|&&l| l != bg).count()).sum();
    let rate = rec.changed_elements() as f64 / entity_tokens as f64;
    assert!((0.10..=0.20).contains(&rate), "changed fraction of entity labels {rate}");
}

#[test]
fn corruptions_are_deterministic_and_label_only() {
    let ds = corpus(300, 16);
    for spec in [
        CorruptionSpec::new(CorruptionKind::Imprecise { mode: ImpreciseMode::RandomVariable }, 1),
        CorruptionSpec::new(CorruptionKind::MissingRandom { drop_rate: 0.3 }, 1),
        CorruptionSpec::new(CorruptionKind::MissingSystematic, 1),
    ] {
        let a = spec.apply(&ds).unwrap();
        let b = spec.apply(&ds).unwrap();
        assert_eq!(a, b);
        let (x, y) = (ds.as_sequences().unwrap(), a.corrupted.as_sequences().unwrap());
        for (s, t) in x.iter().zip(y) {
            assert_eq!(s.tokens, t.tokens);
            assert_eq!(s.features, t.features);
        }
    }
}
