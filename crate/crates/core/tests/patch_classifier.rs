//! Patch classifier: gradient oracle, separable task, determinism.

use ecn_core::data::{Dataset, GridSample, Role, TagSet};
use ecn_core::mlp::Mlp;
use ecn_core::optim::TrainConfig;
use ecn_core::patch::{patch_predict, patch_predict_labels, patch_train, train_on_windows, ChannelGrid, PatchConfig};
use ecn_core::rng::SplitMix64;
use ecn_core::synth::{gen_synthetic_grids, GridGenConfig};

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn loss_gradient_matches_central_differences() {
    let mut rng = SplitMix64::new(77);
    let h = 1e-5;
    for instance in 0..100 {
        let input = 1 + rng.index(6);
        let hidden: Vec<usize> = (0..rng.index(3)).map(|_| 1 + rng.index(5)).collect();
        let k = 2 + rng.index(3);
        let mut net = Mlp::new(input, &hidden, k, instance, 0);
        // Nudge biases so ReLU inputs sit away from the kink.
        let mut params = net.params();
        for p in params.iter_mut() {
            *p += 0.05 * rng.normal();
        }
        net.set_params(&params);
        let batch = 1 + rng.index(4);
        let inputs: Vec<f64> = (0..batch * input).map(|_| rng.normal()).collect();
        let targets: Vec<usize> = (0..batch).map(|_| rng.index(k)).collect();
        let (l1, l2) = (0.01, 0.05);
        let (_, grad) = net.loss_grad(&inputs, &targets, l1, l2).unwrap();
        let grad = grad.flatten();
        for i in 0..params.len() {
            if params[i].abs() < 1e-3 {
                continue;
            }
            let mut p = params.clone();
            p[i] += h;
            net.set_params(&p);
            let plus = net.loss_grad(&inputs, &targets, l1, l2).unwrap().0;
            p[i] -= 2.0 * h;
            net.set_params(&p);
            let minus = net.loss_grad(&inputs, &targets, l1, l2).unwrap().0;
            net.set_params(&params);
            let fd = (plus - minus) / (2.0 * h);
            let e = relative_error(grad[i], fd);
            assert!(e < 1e-4, "instance {instance} param {i}: {} vs {fd} ({e})", grad[i]);
        }
    }
}

fn flat_grid(rng: &mut SplitMix64, colors: &[[f64; 3]]) -> GridSample {
    let (h, w) = (12, 12);
    let split = 3 + rng.index(6);
    let labels: Vec<usize> = (0..h * w).map(|j| usize::from(j % w >= split)).collect();
    let pixels = labels.iter().map(|&l| colors[l]).collect();
    GridSample::new(h, w, pixels, labels)
}

#[test]
fn separable_colors_are_learned() {
    let ts = TagSet::from_names(&["other", "road"], 0).unwrap();
    let colors = [[0.2, 0.7, 0.3], [0.4, 0.4, 0.4]];
    let mut rng = SplitMix64::new(5);
    let train = Dataset::grids(ts.clone(), (0..20).map(|_| flat_grid(&mut rng, &colors)).collect(), Role::Clean);
    let test = Dataset::grids(ts, (0..20).map(|_| flat_grid(&mut rng, &colors)).collect(), Role::Test);
    let cfg = PatchConfig { window: 3, ..PatchConfig::default() };
    let model = patch_train(&train, &cfg).unwrap();
    let pred = patch_predict_labels(&model, &test).unwrap();
    let (mut right, mut total) = (0, 0);
    for (i, p) in pred.iter().enumerate() {
        for (a, b) in p.iter().zip(test.labels_of(i)) {
            right += (a == b) as usize;
            total += 1;
        }
    }
    assert!(right as f64 / total as f64 >= 0.99, "accuracy {right}/{total}");
}

fn small_synthetic() -> (Dataset, Dataset) {
    let cfg = GridGenConfig { n_train: 30, n_gold: 1, n_test: 5, ..GridGenConfig::default() };
    let s = gen_synthetic_grids(&cfg).unwrap();
    (s.train, s.test)
}

#[test]
fn predictions_are_distributions_and_deterministic() {
    let (train, test) = small_synthetic();
    let mut cfg = PatchConfig::default();
    cfg.train.steps = 200;
    let a = patch_train(&train, &cfg).unwrap();
    let b = patch_train(&train, &cfg).unwrap();
    assert_eq!(a, b);
    let g = &test.as_grids().unwrap()[0];
    let rows = patch_predict(&a, g).unwrap();
    assert_eq!(rows.len(), g.height * g.width);
    for r in rows {
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|&p| p >= 0.0));
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn training_loss_trends_down() {
    let (train, _) = small_synthetic();
    let grids = train.as_grids().unwrap();
    let inputs: Vec<ChannelGrid> = grids.iter().map(ChannelGrid::from_pixels).collect();
    let targets: Vec<&[usize]> = grids.iter().map(|g| g.labels.as_slice()).collect();
    let cfg = PatchConfig::default();
    let mut net = Mlp::new(cfg.window * cfg.window * 3, &cfg.hidden, 3, 0, 9);
    let mut losses = Vec::new();
    let train_cfg = TrainConfig { tail_average: false, ..cfg.train.clone() };
    train_on_windows(&mut net, &inputs, &targets, cfg.window, &train_cfg, |_, l| losses.push(l)).unwrap();
    let means: Vec<f64> = losses.chunks(50).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let first = means[0];
    assert!(means[1..].iter().all(|&m| m < first), "{means:?}");
    assert!(*means.last().unwrap() < 0.5 * first, "{means:?}");
}

#[test]
fn mismatched_tagset_is_rejected() {
    let (train, test) = small_synthetic();
    let mut cfg = PatchConfig::default();
    cfg.train.steps = 10;
    let model = patch_train(&train, &cfg).unwrap();
    let other = TagSet::from_names(&["a", "b", "c"], 0).unwrap();
    let relabeled = Dataset::grids(other, test.as_grids().unwrap().to_vec(), Role::Test);
    assert!(patch_predict_labels(&model, &relabeled).is_err());
}

#[test]
fn window_too_large_is_rejected() {
    let (train, _) = small_synthetic();
    let cfg = PatchConfig { window: 65, ..PatchConfig::default() };
    assert!(patch_train(&train, &cfg).is_err());
}
