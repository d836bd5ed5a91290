//! File formats.
//!
//! | file | layout |
//! |---|---|
//! | sequences (CoNLL) | `token<TAB>label[<TAB>name=value...]` per line, blank line between sentences |
//! | grids (`.grid`) | header `ECNGRID v1 H W C K`, then `H*W` lines `r g b label`; records may follow one another |
//! | tag set | one label per line, optional first line `#background=<index>` |
//! | model | JSON container with format, version, kind, schema digest and weights |
//!
//! Feature values that parse as finite numbers are numeric; a string value
//! that would parse as a number is written in double quotes.

use std::fs;
use std::path::{Path, PathBuf};

use ecn_core::base::BaseModel;
use ecn_core::data::{ensure_valid, Dataset, FeatureMap, FeatureValue, GridSample, Role, SequenceSample, TagSet};
use ecn_core::digest::sha256_hex;
use ecn_core::ecn::{EcnModel, RelevantSubsetSpec};
use ecn_core::features::FeatureExtractor;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result, Stage};

pub const GRID_MAGIC: &str = "ECNGRID";
pub const GRID_VERSION: &str = "v1";
pub const MODEL_FORMAT: &str = "ecn-lab-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConllOptions {
    /// Map `B-x` / `I-x` labels to `x`.
    pub strip_bio: bool,
}

impl ConllOptions {
    fn label<'a>(&self, raw: &'a str) -> &'a str {
        if self.strip_bio {
            if let Some(rest) = raw.strip_prefix("B-").or_else(|| raw.strip_prefix("I-")) {
                return rest;
            }
        }
        raw
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> LabError {
    LabError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

pub fn parse_tagset(text: &str, path: &Path) -> Result<TagSet> {
    let mut background = None;
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(v) = line.strip_prefix("#background=") {
            if n != 0 {
                return Err(parse_err(path, n + 1, "#background must be the first line"));
            }
            background = Some(v.parse::<usize>().map_err(|_| parse_err(path, n + 1, "bad background index"))?);
            continue;
        }
        labels.push(line.to_string());
    }
    match background {
        Some(b) => TagSet::new(labels, b),
        None => TagSet::with_default_background(labels),
    }
    .map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn format_tagset(ts: &TagSet) -> String {
    let mut out = format!("#background={}\n", ts.background());
    for l in ts.labels() {
        out.push_str(l);
        out.push('\n');
    }
    out
}

pub fn read_tagset(path: &Path) -> Result<TagSet> {
    parse_tagset(&read_text(path)?, path)
}

pub fn write_tagset(ts: &TagSet, path: &Path) -> Result<()> {
    write_text(path, &format_tagset(ts))
}

fn parse_feature_value(raw: &str) -> FeatureValue {
    if raw.len() >= 2 && raw.starts_with('"') && raw.ends_with('"') {
        return FeatureValue::Str(raw[1..raw.len() - 1].to_string());
    }
    match raw.parse::<f64>() {
        Ok(x) if x.is_finite() => FeatureValue::Num(x),
        _ => FeatureValue::Str(raw.to_string()),
    }
}

fn format_feature(name: &str, value: &FeatureValue) -> std::result::Result<String, String> {
    if name.is_empty() || name.contains(['=', '\t', '\n', '\r']) {
        return Err(format!("feature name {name:?} cannot be written"));
    }
    match value {
        FeatureValue::Num(x) if x.is_finite() => Ok(format!("{name}={x}")),
        FeatureValue::Num(x) => Err(format!("feature {name} has non-finite value {x}")),
        FeatureValue::Str(s) if s.contains(['\t', '\n', '\r']) => {
            Err(format!("feature {name} value contains a tab or newline"))
        }
        FeatureValue::Str(s) if s.parse::<f64>().is_ok() || s.starts_with('"') => Ok(format!("{name}=\"{s}\"")),
        FeatureValue::Str(s) => Ok(format!("{name}={s}")),
    }
}

/// Distinct labels of a CoNLL file, sorted.
pub fn conll_labels(text: &str, opts: ConllOptions) -> Vec<String> {
    let mut set = std::collections::BTreeSet::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with("-DOCSTART-") {
            continue;
        }
        if let Some(l) = line.split('\t').nth(1) {
            set.insert(opts.label(l.trim()).to_string());
        }
    }
    set.into_iter().collect()
}

pub fn parse_conll(text: &str, tagset: &TagSet, opts: ConllOptions, role: Role, path: &Path) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut current = SequenceSample::new(Vec::new(), Vec::new());
    let mut flush = |s: &mut SequenceSample| {
        if !s.is_empty() {
            samples.push(std::mem::replace(s, SequenceSample::new(Vec::new(), Vec::new())));
        }
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut current);
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            continue;
        }
        let mut fields = line.split('\t');
        let token = fields.next().unwrap_or_default();
        let raw = fields.next().ok_or_else(|| parse_err(path, n + 1, "expected `token<TAB>label`"))?.trim();
        if token.is_empty() {
            return Err(parse_err(path, n + 1, "empty token"));
        }
        let name = opts.label(raw);
        let label = tagset.index_of(name).ok_or_else(|| parse_err(path, n + 1, format!("unknown label {name:?}")))?;
        let mut features = FeatureMap::new();
        for f in fields {
            let (k, v) =
                f.split_once('=').ok_or_else(|| parse_err(path, n + 1, format!("feature {f:?} is not name=value")))?;
            features.insert(k.to_string(), parse_feature_value(v));
        }
        current.tokens.push(token.to_string());
        current.labels.push(label);
        current.features.push(features);
    }
    flush(&mut current);
    let ds = Dataset::sequences(tagset.clone(), samples, role);
    ensure_valid(&ds).stage("validate sequences")?;
    Ok(ds)
}

pub fn format_conll(ds: &Dataset) -> Result<String> {
    let samples = ds.as_sequences().stage("write sequences")?;
    let mut out = String::new();
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (j, tok) in s.tokens.iter().enumerate() {
            if tok.is_empty() || tok.contains(['\t', '\n', '\r']) {
                return Err(LabError::Format(format!("sentence {i}, token {j}: {tok:?} cannot be written")));
            }
            out.push_str(tok);
            out.push('\t');
            out.push_str(ds.tagset.name(s.labels[j]));
            for (k, v) in s.features.get(j).into_iter().flatten() {
                out.push('\t');
                out.push_str(&format_feature(k, v).map_err(|m| LabError::Format(format!("sentence {i}: {m}")))?);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn parse_grids(text: &str, tagset: &TagSet, role: Role, path: &Path) -> Result<Dataset> {
    let k = tagset.len();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut samples = Vec::new();
    while let Some((n, header)) = lines.next() {
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 || h[0] != GRID_MAGIC || h[1] != GRID_VERSION {
            return Err(parse_err(path, n + 1, format!("expected `{GRID_MAGIC} {GRID_VERSION} H W C K`")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err(path, n + 1, format!("bad header field {s:?}")));
        let (height, width, channels, labels) = (num(h[2])?, num(h[3])?, num(h[4])?, num(h[5])?);
        if channels != 3 {
            return Err(parse_err(path, n + 1, format!("{channels} channels; only 3 are supported")));
        }
        if labels != k {
            return Err(parse_err(path, n + 1, format!("header declares {labels} labels, tag set has {k}")));
        }
        let mut pixels = Vec::with_capacity(height * width);
        let mut ys = Vec::with_capacity(height * width);
        for _ in 0..height * width {
            let (n, line) = lines.next().ok_or_else(|| parse_err(path, n + 1, "grid ends early"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(path, n + 1, "expected `r g b label`"));
            }
            let mut px = [0.0; 3];
            for (c, v) in px.iter_mut().zip(&f[..3]) {
                *c = v.parse().map_err(|_| parse_err(path, n + 1, format!("bad channel value {v:?}")))?;
            }
            let y: usize = f[3].parse().map_err(|_| parse_err(path, n + 1, format!("bad label {:?}", f[3])))?;
            if y >= k {
                return Err(parse_err(path, n + 1, format!("unknown label {y} (tag set has {k})")));
            }
            pixels.push(px);
            ys.push(y);
        }
        samples.push(GridSample::new(height, width, pixels, ys));
    }
    let ds = Dataset::grids(tagset.clone(), samples, role);
    ensure_valid(&ds).stage("validate grids")?;
    Ok(ds)
}

pub fn format_grids(ds: &Dataset) -> Result<String> {
    let grids = ds.as_grids().stage("write grids")?;
    let mut out = String::new();
    for g in grids {
        out.push_str(&format!("{GRID_MAGIC} {GRID_VERSION} {} {} 3 {}\n", g.height, g.width, ds.tagset.len()));
        for (px, y) in g.pixels.iter().zip(&g.labels) {
            out.push_str(&format!("{} {} {} {}\n", px[0], px[1], px[2], y));
        }
    }
    Ok(out)
}

pub fn is_grid_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "grid")
}

/// Reads a CoNLL or `.grid` file, chosen by extension.
pub fn read_dataset(path: &Path, tagset: &TagSet, opts: ConllOptions, role: Role) -> Result<Dataset> {
    let text = read_text(path)?;
    if is_grid_path(path) {
        parse_grids(&text, tagset, role, path)
    } else {
        parse_conll(&text, tagset, opts, role, path)
    }
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let text = if ds.is_sequence() { format_conll(ds)? } else { format_grids(ds)? };
    write_text(path, &text)
}

/// File name for a split: `<name>.conll` or `<name>.grid`.
pub fn split_file(dir: &Path, name: &str, sequence: bool) -> PathBuf {
    dir.join(format!("{name}.{}", if sequence { "conll" } else { "grid" }))
}

#[derive(Debug, Serialize, Deserialize)]
struct Container<T> {
    format: String,
    version: u32,
    kind: String,
    schema_digest: String,
    model: T,
}

/// Digest of the inputs a base model expects: the token feature schema for
/// a CRF, the window geometry for a patch classifier.
pub fn base_schema_digest(model: &BaseModel) -> String {
    match model {
        BaseModel::Crf(m) => m.schema_digest().to_string(),
        BaseModel::Patch(p) => sha256_hex(format!("patch:window={};channels={}", p.window, p.channels).as_bytes()),
    }
}

fn expected_base_digest(model: &BaseModel) -> String {
    match model {
        BaseModel::Crf(_) => FeatureExtractor::standard().schema_digest(),
        BaseModel::Patch(_) => base_schema_digest(model),
    }
}

fn corrector_digest(spec: &RelevantSubsetSpec) -> String {
    FeatureExtractor::first(spec.n_token_features).schema_digest()
}

fn save_container<T: Serialize>(path: &Path, kind: &str, schema_digest: String, model: &T) -> Result<()> {
    let c = Container { format: MODEL_FORMAT.into(), version: MODEL_VERSION, kind: kind.into(), schema_digest, model };
    let json = serde_json::to_string(&c).map_err(|e| LabError::Format(format!("serialize model: {e}")))?;
    write_text(path, &json)
}

fn load_container<T: for<'de> Deserialize<'de>>(path: &Path, kind: &str) -> Result<Container<T>> {
    let text = read_text(path)?;
    let c: Container<T> = serde_json::from_str(&text)
        .map_err(|e| LabError::Format(format!("{}: not a model file: {e}", path.display())))?;
    if c.format != MODEL_FORMAT || c.version != MODEL_VERSION {
        return Err(LabError::Format(format!(
            "{}: unsupported model container {} v{}",
            path.display(),
            c.format,
            c.version
        )));
    }
    if c.kind != kind {
        return Err(LabError::Format(format!("{}: holds a {} model, expected {kind}", path.display(), c.kind)));
    }
    Ok(c)
}

fn check_digest(path: &Path, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(LabError::Format(format!(
            "{}: schema digest {found} does not match {expected} expected by this build",
            path.display()
        )));
    }
    Ok(())
}

pub fn save_base_model(model: &BaseModel, path: &Path) -> Result<()> {
    save_container(path, "base", base_schema_digest(model), model)
}

/// Loads a base model, refusing files whose schema digest differs from the
/// one this build computes.
pub fn load_base_model(path: &Path) -> Result<BaseModel> {
    let c: Container<BaseModel> = load_container(path, "base")?;
    check_digest(path, &c.schema_digest, &expected_base_digest(&c.model))?;
    check_digest(path, &base_schema_digest(&c.model), &c.schema_digest)?;
    Ok(c.model)
}

pub fn save_corrector(model: &EcnModel, path: &Path) -> Result<()> {
    save_container(path, "corrector", model.feature_schema.clone(), model)
}

pub fn load_corrector(path: &Path) -> Result<EcnModel> {
    let c: Container<EcnModel> = load_container(path, "corrector")?;
    let expected = corrector_digest(&c.model.spec);
    check_digest(path, &c.schema_digest, &expected)?;
    check_digest(path, &c.model.feature_schema, &expected)?;
    Ok(c.model)
}

/// SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Sidecar written next to a corrected dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input: String,
    pub input_digest: String,
    pub base_model: String,
    pub base_model_digest: String,
    pub corrector: String,
    pub corrector_digest: String,
    pub relevant_subset: RelevantSubsetSpec,
    pub tool: String,
}

pub fn provenance_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    data.with_file_name(name)
}

pub fn write_provenance(data: &Path, p: &Provenance) -> Result<()> {
    let json = serde_json::to_string_pretty(p).map_err(|e| LabError::Format(e.to_string()))?;
    write_text(&provenance_path(data), &(json + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_values_round_trip() {
        for v in [
            FeatureValue::Num(1.5),
            FeatureValue::Num(-0.0),
            FeatureValue::Str("abc".into()),
            FeatureValue::Str("12".into()),
            FeatureValue::Str("\"q\"".into()),
            FeatureValue::Str("inf".into()),
            FeatureValue::Str(String::new()),
        ] {
            let text = format_feature("f", &v).unwrap();
            let (_, raw) = text.split_once('=').unwrap();
            assert_eq!(parse_feature_value(raw), v, "{text}");
        }
        assert!(format_feature("f", &FeatureValue::Num(f64::NAN)).is_err());
        assert!(format_feature("a=b", &FeatureValue::Num(1.0)).is_err());
    }

    #[test]
    fn bio_prefixes_are_stripped() {
        let o = ConllOptions { strip_bio: true };
        assert_eq!(o.label("B-geo"), "geo");
        assert_eq!(o.label("I-geo"), "geo");
        assert_eq!(o.label("O"), "O");
        assert_eq!(ConllOptions::default().label("B-geo"), "B-geo");
    }

    #[test]
    fn tagset_text() {
        let p = Path::new("t.txt");
        let ts = parse_tagset("#background=1\nA\nnone\nB\n", p).unwrap();
        assert_eq!(ts.background(), 1);
        assert_eq!(parse_tagset(&format_tagset(&ts), p).unwrap(), ts);
        assert_eq!(parse_tagset("GEO\nO\n", p).unwrap().background(), 1);
        assert!(parse_tagset("GEO\nPER\n", p).is_err());
        assert!(parse_tagset("O\n#background=0\n", p).is_err());
    }
}
