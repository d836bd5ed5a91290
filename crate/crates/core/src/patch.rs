//! Windowed per-pixel classifier for grids.
//!
//! Each pixel is classified from the `w x w` window of channels centred on
//! it. Windows that cross the image edge are reflection-padded (mirror
//! without repeating the edge pixel), which needs `w / 2 < min(H, W)`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{ensure_valid, Dataset, GridSample, TagSet};
use crate::math::argmax;
use crate::mlp::Mlp;
use crate::optim::{TailAverage, TrainConfig};
use crate::rng::SplitMix64;
use crate::{Error, Result};

const STREAM_PATCH_INIT: u64 = 0x41;
const STREAM_PATCH_PIXELS: u64 = 0x42;

/// A dense `H x W x C` tensor, `[(r * W + c) * C + ch]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ChannelGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self { height, width, channels, data }
    }

    /// Pixel colors shifted to be centred on zero.
    pub fn from_pixels(g: &GridSample) -> Self {
        let data = g.pixels.iter().flat_map(|px| px.iter().map(|v| v - 0.5)).collect();
        Self::new(g.height, g.width, 3, data)
    }

    /// Per-pixel distributions (`H*W` rows of `C` values).
    pub fn from_rows(height: usize, width: usize, rows: &[Vec<f64>]) -> Self {
        let channels = rows.first().map_or(0, Vec::len);
        Self::new(height, width, channels, rows.iter().flatten().copied().collect())
    }

    /// Appends the reflection-padded `w x w` window around `(row, col)`.
    pub fn window_into(&self, row: usize, col: usize, w: usize, out: &mut Vec<f64>) {
        let half = (w / 2) as isize;
        for dr in -half..w as isize - half {
            let r = reflect(row as isize + dr, self.height);
            for dc in -half..w as isize - half {
                let c = reflect(col as isize + dc, self.width);
                let base = (r * self.width + c) * self.channels;
                out.extend_from_slice(&self.data[base..base + self.channels]);
            }
        }
    }
}

/// Mirror index into `0..n` (`-1 -> 1`, `n -> n - 2`).
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

pub fn check_window_fits(window: usize, height: usize, width: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    if window / 2 >= height.min(width) {
        return Err(Error::InvalidParameter(format!(
            "window {window} does not fit a {height}x{width} grid with reflection padding"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchConfig {
    /// Window side `w`.
    pub window: usize,
    pub hidden: Vec<usize>,
    /// `batch_size` counts pixels per step.
    pub train: TrainConfig,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            window: 9,
            hidden: alloc::vec![16],
            train: TrainConfig {
                steps: 1500,
                batch_size: 64,
                learning_rate: 0.1,
                l1: 0.0,
                l2: 1e-4,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchClassifier {
    pub window: usize,
    pub channels: usize,
    pub tagset: TagSet,
    pub net: Mlp,
}

impl PatchClassifier {
    pub fn new(window: usize, channels: usize, hidden: &[usize], tagset: TagSet, seed: u64) -> Self {
        let net = Mlp::new(window * window * channels, hidden, tagset.len(), seed, STREAM_PATCH_INIT);
        Self { window, channels, tagset, net }
    }

    /// Distribution for every pixel of a channel grid.
    pub fn predict_channels(&self, grid: &ChannelGrid) -> Result<Vec<Vec<f64>>> {
        if grid.channels != self.channels {
            return Err(Error::LengthMismatch { what: "channels", expected: self.channels, found: grid.channels });
        }
        check_window_fits(self.window, grid.height, grid.width)?;
        let mut buf = Vec::with_capacity(self.net.input_size());
        let mut out = Vec::with_capacity(grid.height * grid.width);
        for r in 0..grid.height {
            for c in 0..grid.width {
                buf.clear();
                grid.window_into(r, c, self.window, &mut buf);
                out.push(self.net.forward(&buf));
            }
        }
        Ok(out)
    }
}

/// Trains a patch classifier on pixels sampled uniformly from the dataset.
pub fn patch_train(train: &Dataset, cfg: &PatchConfig) -> Result<PatchClassifier> {
    let grids = train.as_grids()?;
    if grids.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    ensure_valid(train)?;
    cfg.train.validate()?;
    for g in grids {
        check_window_fits(cfg.window, g.height, g.width)?;
    }
    let inputs: Vec<ChannelGrid> = grids.iter().map(ChannelGrid::from_pixels).collect();
    let targets: Vec<&[usize]> = grids.iter().map(|g| g.labels.as_slice()).collect();
    let mut model = PatchClassifier::new(cfg.window, 3, &cfg.hidden, train.tagset.clone(), cfg.train.seed);
    train_on_windows(&mut model.net, &inputs, &targets, cfg.window, &cfg.train, |_, _| {})?;
    Ok(model)
}

/// Minibatch descent on uniformly sampled pixel windows.
pub fn train_on_windows(
    net: &mut Mlp,
    inputs: &[ChannelGrid],
    targets: &[&[usize]],
    window: usize,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<()> {
    let mut rng = SplitMix64::stream(cfg.seed, &[STREAM_PATCH_PIXELS]);
    let mut batch = Vec::with_capacity(cfg.batch_size * net.input_size());
    let mut labels = Vec::with_capacity(cfg.batch_size);
    let mut average = TailAverage::new(cfg, net.param_count());
    for step in 0..cfg.steps {
        batch.clear();
        labels.clear();
        for _ in 0..cfg.batch_size {
            let i = rng.index(inputs.len());
            let g = &inputs[i];
            let (r, c) = (rng.index(g.height), rng.index(g.width));
            g.window_into(r, c, window, &mut batch);
            labels.push(targets[i][r * g.width + c]);
        }
        let (loss, grad) = net.loss_grad(&batch, &labels, cfg.l1, cfg.l2)?;
        observe(step, loss);
        net.descend(&grad, cfg.learning_rate);
        if let Some(avg) = average.as_mut() {
            avg.observe(step, &net.params());
        }
    }
    if let Some(avg) = average {
        net.set_params(&avg.mean());
    }
    if !net.is_finite() {
        return Err(Error::NonFinite("patch classifier weights after training"));
    }
    Ok(())
}

/// `H*W` per-pixel label distributions.
pub fn patch_predict(model: &PatchClassifier, grid: &GridSample) -> Result<Vec<Vec<f64>>> {
    model.predict_channels(&ChannelGrid::from_pixels(grid))
}

/// Argmax labels for every grid of `ds`.
pub fn patch_predict_labels(model: &PatchClassifier, ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    if ds.tagset != model.tagset {
        return Err(Error::TagSetMismatch);
    }
    ds.as_grids()?
        .iter()
        .map(|g| patch_predict(model, g).map(|rows| rows.iter().map(|p| argmax(p)).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn reflection_indices() {
        let got: Vec<usize> = (-3..8).map(|i| reflect(i, 5)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect(-2, 1), 0);
    }

    #[test]
    fn window_reflects_at_corner() {
        let g = ChannelGrid::new(3, 3, 1, (0..9).map(|v| v as f64).collect());
        let mut out = Vec::new();
        g.window_into(0, 0, 3, &mut out);
        assert_eq!(out, vec![4.0, 3.0, 4.0, 1.0, 0.0, 1.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn window_must_fit() {
        assert!(check_window_fits(9, 4, 32).is_err());
        assert!(check_window_fits(9, 5, 5).is_ok());
    }
}
