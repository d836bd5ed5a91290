use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ecn_core::base::{evaluate, evaluate_labels, train_base, Evaluation};
use ecn_core::corruption::CorruptionSpec;
use ecn_core::data::{Dataset, Role, TagSet};
use ecn_core::ecn::{ecn_correct, ecn_train, RsVariant};
use ecn_lab::config::{AnyConfig, DataSource, ExperimentConfig};
use ecn_lab::error::{LabError, Result};
use ecn_lab::io::{self, ConllOptions, Provenance};
use ecn_lab::presets;
use ecn_lab::runner::{load_splits, run_and_write, ResultTable};
use ecn_lab::sweep::run_sweep_and_write;

#[derive(Debug, Parser)]
#[command(name = "ecn-lab", version, about = "Error-correcting networks for structurally noisy labels")]
struct Cli {
    /// Experiment or sweep config (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named config; see `ecn-lab presets`.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Run only this seed (also seeds generation, corruption and training).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Base,
    Corrector,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    XOnly,
    YOnly,
    Full,
}

impl From<Variant> for RsVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::XOnly => RsVariant::XOnly,
            Variant::YOnly => RsVariant::YOnly,
            Variant::Full => RsVariant::Full,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
struct DataArgs {
    /// Tag set file; defaults to `tagset.txt` beside the data file, then to
    /// the labels found in a CoNLL file.
    #[arg(long)]
    tagset: Option<PathBuf>,
    /// Map B-/I- prefixed CoNLL labels to their bare class.
    #[arg(long)]
    strip_bio: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic train/gold/test splits and the tag set to --out.
    Gen,
    /// Apply the config's corruption to a dataset.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train a base model or a corrector.
    Train {
        kind: ModelKind,
        /// Training data: the corrupted corpus (base) or the gold set (corrector).
        #[arg(long)]
        data: PathBuf,
        /// Where to write the model.
        #[arg(long)]
        model: PathBuf,
        /// Base model the corrector learns to correct.
        #[arg(long, required_if_eq("kind", "corrector"))]
        base: Option<PathBuf>,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        #[command(flatten)]
        args: DataArgs,
    },
    /// Relabel a dataset with a trained corrector.
    Correct {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        corrector: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Score a model (or a prediction file) against a labeled test set.
    Evaluate {
        #[arg(long)]
        test: PathBuf,
        #[arg(long, required_unless_present = "pred", conflicts_with = "pred")]
        model: Option<PathBuf>,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run an experiment and write a new run directory.
    Run,
    /// Run a sensitivity sweep and write a new run directory.
    Sweep,
    /// Render results.csv files as one markdown table per metric.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// List the named configs.
    Presets,
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn load_config(cli: &Cli) -> Result<Option<AnyConfig>> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(p), _) => AnyConfig::load(p)?,
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => return Ok(None),
    };
    let exp = cfg.experiment_mut();
    if let Some(seed) = cli.seed {
        exp.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        exp.out_dir = out.clone();
    }
    Ok(Some(cfg))
}

fn require_config(cli: &Cli) -> Result<AnyConfig> {
    load_config(cli)?.ok_or_else(|| config_err("this command needs --config or --preset"))
}

/// Settings for the single-step commands; a bare default when no config is
/// given.
fn step_config(cli: &Cli) -> Result<(ExperimentConfig, u64)> {
    let exp = match load_config(cli)? {
        Some(c) => c.experiment().clone(),
        None => ExperimentConfig::from_json(r#"{"name":"cli","data":{"source":"synthetic_sequences"}}"#)?,
    };
    let seed = cli.seed.unwrap_or(exp.seeds[0]);
    Ok((exp, seed))
}

fn resolve_tagset(args: &DataArgs, data: &Path) -> Result<TagSet> {
    if let Some(p) = &args.tagset {
        return io::read_tagset(p);
    }
    let beside = data.with_file_name("tagset.txt");
    if beside.exists() {
        return io::read_tagset(&beside);
    }
    if io::is_grid_path(data) {
        return Err(config_err(format!("{}: grid files need --tagset", data.display())));
    }
    let labels = io::conll_labels(&io::read_text(data)?, ConllOptions { strip_bio: args.strip_bio });
    TagSet::with_default_background(labels)
        .map_err(|e| config_err(format!("cannot infer a tag set, pass --tagset: {e}")))
}

fn read_data(args: &DataArgs, path: &Path, tagset: &TagSet, role: Role) -> Result<Dataset> {
    io::read_dataset(path, tagset, ConllOptions { strip_bio: args.strip_bio }, role)
}

fn stage<T>(r: ecn_core::Result<T>, name: &str) -> Result<T> {
    r.map_err(|source| LabError::Stage { stage: name.to_string(), source })
}

fn print_evaluation(e: &Evaluation, tagset: &TagSet) {
    let [w, m] = e.metric_names();
    let per_class: serde_json::Map<String, serde_json::Value> =
        tagset.labels().iter().zip(&e.per_class).map(|(n, s)| (n.clone(), (*s).into())).collect();
    let doc = serde_json::json!({ w: e.weighted, m: e.macro_avg, "per_class": per_class });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
}

fn gen(cli: &Cli) -> Result<()> {
    let cfg = require_config(cli)?;
    let exp = cfg.experiment();
    let out = cli.out.clone().ok_or_else(|| config_err("gen needs --out"))?;
    if !matches!(exp.data, DataSource::SyntheticSequences(_) | DataSource::SyntheticGrids(_)) {
        return Err(config_err("gen needs a synthetic data source"));
    }
    let seed = cli.seed.unwrap_or(exp.seeds[0]);
    let s = load_splits(&exp.data, seed)?;
    let seq = s.train.is_sequence();
    for (name, ds) in [("train", &s.train), ("gold", &s.gold), ("test", &s.test)] {
        io::write_dataset(ds, &io::split_file(&out, name, seq))?;
    }
    io::write_tagset(&s.tagset, &out.join("tagset.txt"))?;
    eprintln!("wrote {} / {} / {} samples to {}", s.train.len(), s.gold.len(), s.test.len(), out.display());
    Ok(())
}

fn corrupt(cli: &Cli, input: &Path, output: &Path, args: &DataArgs) -> Result<()> {
    let (exp, seed) = step_config(cli)?;
    let kind = exp.corruption.clone().ok_or_else(|| config_err("the config has no corruption"))?;
    let spec = CorruptionSpec::new(kind, seed);
    spec.validate().map_err(|e| config_err(e.to_string()))?;
    let tagset = resolve_tagset(args, input)?;
    let ds = read_data(args, input, &tagset, Role::Clean)?;
    let rec = stage(spec.apply(&ds), "corrupt")?;
    io::write_dataset(&rec.corrupted, output)?;
    let mut audit_path = output.as_os_str().to_os_string();
    audit_path.push(".corruption.json");
    let audit = serde_json::json!({
        "spec": serde_json::from_str::<serde_json::Value>(&spec.canonical_json()).expect("canonical json"),
        "spec_digest": rec.spec_digest,
        "changed_elements": rec.changed_elements(),
        "changed_fraction": rec.corrupted_fraction(),
    });
    io::write_text(Path::new(&audit_path), &(serde_json::to_string_pretty(&audit).expect("json") + "\n"))?;
    eprintln!("changed {} elements ({:.3})", rec.changed_elements(), rec.corrupted_fraction());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    cli: &Cli,
    kind: ModelKind,
    data: &Path,
    model: &Path,
    base: Option<&Path>,
    variant: Option<Variant>,
    args: &DataArgs,
) -> Result<()> {
    let (exp, seed) = step_config(cli)?;
    let pipeline = exp.pipeline_for(seed);
    let tagset = resolve_tagset(args, data)?;
    match kind {
        ModelKind::Base => {
            let ds = read_data(args, data, &tagset, Role::Corrupted)?;
            let f = stage(train_base(&ds, &pipeline.base), "train base model")?;
            io::save_base_model(&f, model)
        }
        ModelKind::Corrector => {
            let f = io::load_base_model(base.expect("clap requires --base"))?;
            let gold = read_data(args, data, &tagset, Role::Gold)?;
            let mut rs = exp.rs_for(seed);
            if let Some(v) = variant {
                rs.variant = v.into();
            }
            let g = stage(ecn_train(&f, &gold, &rs, &pipeline.ecn), "train corrector")?;
            io::save_corrector(&g, model)
        }
    }
}

fn correct(base: &Path, corrector: &Path, input: &Path, output: &Path, args: &DataArgs) -> Result<()> {
    let f = io::load_base_model(base)?;
    let g = io::load_corrector(corrector)?;
    let tagset = resolve_tagset(args, input)?;
    let ds = read_data(args, input, &tagset, Role::Corrupted)?;
    let corrected = stage(ecn_correct(&f, &g, &ds), "correct")?;
    io::write_dataset(&corrected, output)?;
    let p = Provenance {
        input: input.display().to_string(),
        input_digest: io::file_digest(input)?,
        base_model: base.display().to_string(),
        base_model_digest: io::file_digest(base)?,
        corrector: corrector.display().to_string(),
        corrector_digest: io::file_digest(corrector)?,
        relevant_subset: g.spec.clone(),
        tool: format!("ecn-lab {}", env!("CARGO_PKG_VERSION")),
    };
    io::write_provenance(output, &p)
}

fn evaluate_cmd(test: &Path, model: Option<&Path>, pred: Option<&Path>, args: &DataArgs) -> Result<()> {
    let tagset = resolve_tagset(args, test)?;
    let truth = read_data(args, test, &tagset, Role::Test)?;
    let e = match (model, pred) {
        (Some(m), _) => stage(evaluate(&io::load_base_model(m)?, &truth), "evaluate")?,
        (None, Some(p)) => {
            let pred = read_data(args, p, &tagset, Role::Test)?;
            stage(evaluate_labels(&pred, &truth), "evaluate")?
        }
        (None, None) => unreachable!("clap requires --model or --pred"),
    };
    print_evaluation(&e, &tagset);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let AnyConfig::Experiment(cfg) = require_config(cli)? else {
        return Err(config_err("this is a sweep config; use `ecn-lab sweep`"));
    };
    let (dir, out) = run_and_write(&cfg)?;
    print!("{}", out.table.to_markdown());
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn sweep(cli: &Cli) -> Result<()> {
    let AnyConfig::Sweep(cfg) = require_config(cli)? else {
        return Err(config_err("this is an experiment config; use `ecn-lab run`"));
    };
    let (dir, out) = run_sweep_and_write(&cfg)?;
    print!("{}", out.table.to_markdown());
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn report(cli: &Cli, files: &[PathBuf]) -> Result<()> {
    let mut table = ResultTable::default();
    for f in files {
        table.rows.extend(ResultTable::from_csv(&io::read_text(f)?, f)?.rows);
    }
    let md = table.to_markdown();
    match &cli.out {
        Some(dir) => io::write_text(&dir.join("report.md"), &md),
        None => {
            print!("{md}");
            Ok(())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen => gen(cli),
        Command::Corrupt { input, output, data } => corrupt(cli, input, output, data),
        Command::Train { kind, data, model, base, variant, args } => {
            train(cli, *kind, data, model, base.as_deref(), *variant, args)
        }
        Command::Correct { base, corrector, input, output, data } => correct(base, corrector, input, output, data),
        Command::Evaluate { test, model, pred, data } => evaluate_cmd(test, model.as_deref(), pred.as_deref(), data),
        Command::Run => run(cli),
        Command::Sweep => sweep(cli),
        Command::Report { results } => report(cli, results),
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
