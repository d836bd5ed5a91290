use ecn_core::data::validate_dataset;
use ecn_core::synth::*;

#[test]
fn entity_fraction_matches_expectation() {
    let cfg = SeqGenConfig { n_train: 4000, n_gold: 0, n_test: 0, ..SeqGenConfig::default() };
    let ds = gen_synthetic_sequences(&cfg).unwrap().train;
    let (mut entity, mut total) = (0usize, 0usize);
    for i in 0..ds.len() {
        let l = ds.labels_of(i);
        entity += l.iter().filter(|&&x| x != 0).count();
        total += l.len();
    }
    let expected = cfg.density * cfg.mean_entity_length() / cfg.mean_sentence_length();
    let got = entity as f64 / total as f64;
    assert!((got / expected - 1.0).abs() <= 0.10, "{got} vs {expected}");
}

#[test]
fn entity_tokens_are_capitalised_or_connectors() {
    let ds = gen_synthetic_sequences(&SeqGenConfig { n_train: 300, ..SeqGenConfig::default() }).unwrap().train;
    assert!(validate_dataset(&ds).is_empty());
    for s in ds.as_sequences().unwrap() {
        for (j, (t, &l)) in s.tokens.iter().zip(&s.labels).enumerate() {
            if l == 0 {
                continue;
            }
            let first = t.chars().next().unwrap();
            // Lowercase inner connector of a three-token name, or a year.
            let inner = j > 0 && s.labels[j - 1] == l && s.labels.get(j + 1) == Some(&l);
            assert!(first.is_uppercase() || first.is_ascii_digit() || inner, "{t:?}");
        }
    }
}

#[test]
fn tagset_has_background_and_entity_classes() {
    let ts = sequence_tagset();
    assert_eq!(ts.name(ts.background()), "O");
    assert!(ts.len() >= 5);
}

fn nearest(color: &[f64; 3], palette: &[[f64; 3]]) -> f64 {
    palette
        .iter()
        .map(|c| c.iter().zip(color).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn pixel_frequencies_match_colour_recount() {
    let cfg = GridGenConfig { n_train: 200, n_gold: 0, n_test: 0, noise: 0.0, ..GridGenConfig::default() };
    let ds = gen_synthetic_grids(&cfg).unwrap().train;
    let mut from_labels = [0usize; 3];
    let mut from_colours = [0usize; 3];
    for g in ds.as_grids().unwrap() {
        for (px, &l) in g.pixels.iter().zip(&g.labels) {
            from_labels[l] += 1;
            let d = [nearest(px, &cfg.other_colors), nearest(px, &cfg.road_colors), nearest(px, &cfg.vehicle_colors)];
            let class = (0..3).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
            assert_eq!(d[class], 0.0);
            from_colours[class] += 1;
        }
        // Road band: contiguous rows with no background pixel.
        let band: Vec<usize> =
            (0..g.height).filter(|&r| (0..g.width).all(|c| g.labels[g.at(r, c)] != GRID_OTHER)).collect();
        assert!(band.windows(2).all(|w| w[1] == w[0] + 1));
        let (top, h) = (band[0], band.len());
        assert!((cfg.road_top.0..=cfg.road_top.1).contains(&top), "top {top} h {h}");
        assert!((cfg.road_height.0..=cfg.road_height.1).contains(&h));
        for r in (0..g.height).filter(|r| !band.contains(r)) {
            assert!((0..g.width).all(|c| g.labels[g.at(r, c)] == GRID_OTHER));
        }
    }
    assert_eq!(from_labels, from_colours);
    // Expected band share of the image.
    let total = (200 * cfg.height * cfg.width) as f64;
    let band_share = (from_labels[GRID_ROAD] + from_labels[GRID_VEHICLE]) as f64 / total;
    let expected = (cfg.road_height.0 + cfg.road_height.1) as f64 / 2.0 / cfg.height as f64;
    assert!((band_share - expected).abs() < 0.01, "{band_share} vs {expected}");
    assert!(from_labels[GRID_VEHICLE] > 0);
}

#[test]
fn grid_generation_is_deterministic() {
    let cfg = GridGenConfig { n_train: 5, n_gold: 2, n_test: 2, ..GridGenConfig::default() };
    assert_eq!(gen_synthetic_grids(&cfg).unwrap().train, gen_synthetic_grids(&cfg).unwrap().train);
    let other = GridGenConfig { seed: 1, ..cfg.clone() };
    assert_ne!(gen_synthetic_grids(&cfg).unwrap().train, gen_synthetic_grids(&other).unwrap().train);
}
