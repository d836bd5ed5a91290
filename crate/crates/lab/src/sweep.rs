//! Sensitivity sweeps over one RS setting, with an SVG line plot.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ecn_core::base::{train_base, Evaluation};
use ecn_core::baselines::{run_baseline_with, Strategy};
use ecn_core::ecn::RsVariant;
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::{LabError, Result, Stage};
use crate::io;
use crate::runner::{create_run_dir, mean_std, seed_data, thread_pool, timings_csv, Timing};

/// One score. `value` is `None` for the baselines, which run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: Option<usize>,
    pub strategy: Strategy,
    pub score: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: &'static str,
    pub metric: String,
    pub values: Vec<usize>,
    pub variant: Strategy,
    pub points: Vec<SweepPoint>,
}

fn ecn_strategy(v: RsVariant) -> Strategy {
    match v {
        RsVariant::XOnly => Strategy::EcnXOnly,
        RsVariant::YOnly => Strategy::EcnYOnly,
        RsVariant::Full => Strategy::EcnFull,
    }
}

impl SweepTable {
    fn mean_of(&self, keep: impl Fn(&SweepPoint) -> bool) -> Option<f64> {
        let xs: Vec<f64> = self.points.iter().filter(|p| keep(p)).map(|p| p.score).collect();
        (!xs.is_empty()).then(|| mean_std(&xs).0)
    }

    /// Mean ECN score at each axis value, in value order.
    pub fn curve(&self) -> Vec<(usize, f64)> {
        self.values.iter().filter_map(|&v| self.mean_of(|p| p.value == Some(v)).map(|m| (v, m))).collect()
    }

    pub fn baseline(&self, s: Strategy) -> Option<f64> {
        self.mean_of(|p| p.value.is_none() && p.strategy == s)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| LabError::Format(format!("csv: {e}"));
        w.write_record(["axis", "value", "strategy", "metric", "score", "seed"]).map_err(err)?;
        for p in &self.points {
            w.write_record([
                self.axis.to_string(),
                p.value.map(|v| v.to_string()).unwrap_or_default(),
                p.strategy.as_str().to_string(),
                self.metric.clone(),
                format!("{}", p.score),
                p.seed.to_string(),
            ])
            .map_err(err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| LabError::Format(e.to_string()))?).expect("UTF-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "### {} vs {} ({})\n\n| {} | mean | std |\n|---:|---:|---:|\n",
            self.metric,
            self.axis,
            self.variant.as_str(),
            self.axis
        );
        for &v in &self.values {
            let xs: Vec<f64> = self.points.iter().filter(|p| p.value == Some(v)).map(|p| p.score).collect();
            if !xs.is_empty() {
                let (m, s) = mean_std(&xs);
                let _ = writeln!(out, "| {v} | {m:.3} | {s:.3} |");
            }
        }
        for s in [Strategy::CorruptedOnly, Strategy::GoldOnly] {
            if let Some(m) = self.baseline(s) {
                let _ = writeln!(out, "| {} | {m:.3} | |", s.as_str());
            }
        }
        out
    }

    /// Line plot of the ECN curve with the baselines as horizontal lines.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const L: f64 = 64.0;
        const R: f64 = 160.0;
        const T: f64 = 36.0;
        const B: f64 = 52.0;
        let curve = self.curve();
        let baselines: Vec<(Strategy, f64, &str)> =
            [(Strategy::CorruptedOnly, "#c0392b"), (Strategy::GoldOnly, "#7f8c8d")]
                .into_iter()
                .filter_map(|(s, c)| self.baseline(s).map(|m| (s, m, c)))
                .collect();
        let ys = curve.iter().map(|p| p.1).chain(baselines.iter().map(|b| b.1));
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        let (lo, hi) = if lo.is_finite() { ((lo - 0.05).max(0.0), (hi + 0.05).min(1.0)) } else { (0.0, 1.0) };
        let (lo, hi) = if hi - lo < 1e-9 { (lo - 0.05, hi + 0.05) } else { (lo, hi) };
        let (x0, x1) = (
            *self.values.first().unwrap_or(&0) as f64,
            (*self.values.last().unwrap_or(&1) as f64).max(*self.values.first().unwrap_or(&0) as f64 + 1.0),
        );
        let px = |v: f64| L + (v - x0) / (x1 - x0) * (W - L - R);
        let py = |y: f64| T + (hi - y) / (hi - lo) * (H - T - B);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{} vs {}</text>"#,
            (W - R + L) / 2.0,
            self.metric,
            self.axis
        );
        let (axis_y, right) = (H - B, W - R);
        let _ = writeln!(s, r#"<line x1="{L}" y1="{axis_y}" x2="{right}" y2="{axis_y}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{axis_y}" stroke="black"/>"#);
        for &v in &self.values {
            let x = px(v as f64);
            let _ =
                writeln!(s, r#"<line x1="{x:.1}" y1="{axis_y}" x2="{x:.1}" y2="{}" stroke="black"/>"#, axis_y + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{v}</text>"#, axis_y + 18.0);
        }
        for i in 0..=4 {
            let y = lo + (hi - lo) * i as f64 / 4.0;
            let yy = py(y);
            let _ = writeln!(s, r#"<line x1="{}" y1="{yy:.1}" x2="{L}" y2="{yy:.1}" stroke="black"/>"#, L - 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, L - 8.0, yy + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (W - R + L) / 2.0,
            H - 12.0,
            self.axis
        );
        let mut legend = Vec::new();
        for (strategy, m, color) in &baselines {
            let y = py(*m);
            let _ = writeln!(
                s,
                r#"<line x1="{L}" y1="{y:.1}" x2="{right}" y2="{y:.1}" stroke="{color}" stroke-dasharray="6 4"/>"#
            );
            legend.push((strategy.as_str(), *color, true));
        }
        if !curve.is_empty() {
            let pts: Vec<String> = curve.iter().map(|&(v, m)| format!("{:.1},{:.1}", px(v as f64), py(m))).collect();
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#2471a3" stroke-width="2"/>"##,
                pts.join(" ")
            );
            for &(v, m) in &curve {
                let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#2471a3"/>"##, px(v as f64), py(m));
            }
            legend.insert(0, (self.variant.as_str(), "#2471a3", false));
        }
        for (i, (name, color, dashed)) in legend.iter().enumerate() {
            let y = T + 10.0 + 20.0 * i as f64;
            let x = W - R + 16.0;
            let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#,
                x + 24.0
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, x + 30.0, y + 4.0);
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: SweepTable,
    pub timings: Vec<Timing>,
}

fn score(e: &Evaluation, focus: Option<usize>) -> f64 {
    focus.map_or(e.weighted, |c| e.per_class[c])
}

/// Runs corrupted-only and gold-only once per seed and the ECN variant at
/// every axis value, all on one shared base model per seed.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    thread_pool()?.install(|| run_sweep_in_pool(cfg))
}

fn run_sweep_in_pool(cfg: &SweepConfig) -> Result<SweepOutput> {
    let base = &cfg.base;
    let data = seed_data(base)?;
    let tagset = &data[0].test.tagset;
    let focus = match &cfg.focus_class {
        Some(name) => Some(tagset.index_of(name).ok_or_else(|| {
            LabError::Config(format!("focus class {name:?} is not in the tag set {:?}", tagset.labels()))
        })?),
        None => None,
    };
    let metric = match (focus, data[0].test.is_sequence()) {
        (Some(c), true) => format!("f1_{}", tagset.name(c)),
        (Some(c), false) => format!("iou_{}", tagset.name(c)),
        (None, true) => "weighted_f1".into(),
        (None, false) => "weighted_iou".into(),
    };
    let variant = cfg.variant();
    let ecn = ecn_strategy(variant);

    let per_seed: Vec<(Vec<SweepPoint>, Vec<Timing>)> = base
        .seeds
        .par_iter()
        .zip(&data)
        .map(|(&seed, d)| {
            let pipeline = base.pipeline_for(seed);
            let rs = base.rs_for(seed).with_variant(variant);
            let bd = d.baseline_data();
            let t = Instant::now();
            let f = train_base(&d.corrupted, &pipeline.base).stage(format!("seed {seed}: train base model"))?;
            let mut timings = vec![Timing { seed, job: "base_model".into(), seconds: t.elapsed().as_secs_f64() }];
            let jobs: Vec<(Option<usize>, Strategy)> = [(None, Strategy::CorruptedOnly), (None, Strategy::GoldOnly)]
                .into_iter()
                .chain(cfg.values.iter().map(|&v| (Some(v), ecn)))
                .collect();
            let results: Vec<(SweepPoint, Timing)> = jobs
                .par_iter()
                .map(|&(value, strategy)| {
                    let t = Instant::now();
                    let spec = value.map_or_else(|| rs.clone(), |v| cfg.axis.apply(&rs, v));
                    let f = strategy.uses_corrupted_base().then(|| f.clone());
                    let job = match value {
                        Some(v) => format!("{}={v}", cfg.axis.as_str()),
                        None => strategy.as_str().to_string(),
                    };
                    let e =
                        run_baseline_with(strategy, bd, &spec, &pipeline, f).stage(format!("seed {seed}: {job}"))?;
                    Ok((
                        SweepPoint { value, strategy, score: score(&e, focus), seed },
                        Timing { seed, job, seconds: t.elapsed().as_secs_f64() },
                    ))
                })
                .collect::<Result<_>>()?;
            let mut points = Vec::new();
            for (p, t) in results {
                points.push(p);
                timings.push(t);
            }
            Ok((points, timings))
        })
        .collect::<Result<_>>()?;

    let mut table =
        SweepTable { axis: cfg.axis.as_str(), metric, values: cfg.values.clone(), variant: ecn, points: Vec::new() };
    let mut timings = Vec::new();
    for (p, t) in per_seed {
        table.points.extend(p);
        timings.extend(t);
    }
    Ok(SweepOutput { table, timings })
}

/// Writes `config.json`, `sweep.csv`, `sweep.md`, `sweep.svg` and
/// `timings.csv` into `dir`.
pub fn write_sweep(dir: &Path, cfg: &SweepConfig, out: &SweepOutput) -> Result<()> {
    io::write_text(&dir.join("config.json"), &(cfg.to_json() + "\n"))?;
    io::write_text(&dir.join("sweep.csv"), &out.table.to_csv()?)?;
    io::write_text(&dir.join("sweep.md"), &out.table.to_markdown())?;
    io::write_text(&dir.join("sweep.svg"), &out.table.to_svg())?;
    io::write_text(&dir.join("timings.csv"), &timings_csv(&out.timings)?)
}

pub fn run_sweep_and_write(cfg: &SweepConfig) -> Result<(PathBuf, SweepOutput)> {
    let out = run_sweep(cfg)?;
    let dir = create_run_dir(&cfg.base.out_dir, &cfg.name)?;
    write_sweep(&dir, cfg, &out)?;
    Ok((dir, out))
}
