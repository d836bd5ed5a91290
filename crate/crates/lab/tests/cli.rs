use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecn-lab")).args(args).current_dir(cwd).output().expect("spawn ecn-lab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "name": "tiny",
  "data": {"source": "synthetic_sequences", "n_train": 60, "n_gold": 12, "n_test": 20},
  "corruption": {"kind": "imprecise", "mode": "fixed"},
  "strategies": ["corrupted_only", "ecn_full"],
  "pipeline": {"base": {"crf": {"steps": 100}}, "ecn": {"train": {"steps": 100}}},
  "seeds": [0]
}"#;

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&lab(&[], d)), 1);
    assert_eq!(code(&lab(&["frobnicate"], d)), 1);
    assert_eq!(code(&lab(&["--help"], d)), 0);
    assert_eq!(code(&lab(&["run", "--preset", "no-such-preset"], d)), 1);
    assert_eq!(code(&lab(&["run"], d)), 1);
    assert_eq!(code(&lab(&["run", "--config", "missing.json"], d)), 1);
    std::fs::write(d.join("bad.json"), "{not json").unwrap();
    assert_eq!(code(&lab(&["run", "--config", "bad.json"], d)), 1);
    std::fs::write(d.join("seedless.json"), SMALL.replace("[0]", "[]")).unwrap();
    assert_eq!(code(&lab(&["run", "--config", "seedless.json"], d)), 1);
    assert_eq!(code(&lab(&["sweep", "--preset", "gmb-im-fixed-desk"], d)), 1);
    assert_eq!(code(&lab(&["train", "corrector", "--data", "x", "--model", "y"], d)), 1);
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), SMALL).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ecn-lab"))
        .args(["run", "--config", "c.json"])
        .env("ECN_LAB_THREADS", "0")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tagset.txt"), "O\nGEO\n").unwrap();
    std::fs::write(d.join("bad.conll"), "Paris\tCITY\n").unwrap();
    let o = lab(&["train", "base", "--data", "bad.conll", "--model", "f.json"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("CITY"), "{}", stderr(&o));
    assert_eq!(code(&lab(&["evaluate", "--test", "nothing.conll", "--pred", "nothing.conll"], d)), 2);
}

#[test]
fn step_by_step_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), SMALL).unwrap();
    let ok = |args: &[&str]| {
        let o = lab(args, d);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        o
    };
    ok(&["gen", "--config", "c.json", "--out", "data"]);
    for f in ["train.conll", "gold.conll", "test.conll", "tagset.txt"] {
        assert!(d.join("data").join(f).is_file(), "{f}");
    }
    ok(&["corrupt", "--config", "c.json", "--input", "data/train.conll", "--output", "data/corrupted.conll"]);
    let audit = std::fs::read_to_string(d.join("data/corrupted.conll.corruption.json")).unwrap();
    assert!(audit.contains("spec_digest"));
    ok(&["train", "base", "--config", "c.json", "--data", "data/corrupted.conll", "--model", "f.json"]);
    ok(&[
        "train",
        "corrector",
        "--config",
        "c.json",
        "--data",
        "data/gold.conll",
        "--base",
        "f.json",
        "--model",
        "g.json",
        "--variant",
        "y-only",
    ]);
    ok(&[
        "correct",
        "--base",
        "f.json",
        "--corrector",
        "g.json",
        "--input",
        "data/corrupted.conll",
        "--output",
        "data/corrected.conll",
    ]);
    let prov: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("data/corrected.conll.provenance.json")).unwrap())
            .unwrap();
    assert_eq!(prov["relevant_subset"]["variant"], "y_only");
    assert_eq!(prov["base_model_digest"].as_str().unwrap().len(), 64);
    let o = ok(&["evaluate", "--test", "data/test.conll", "--model", "f.json"]);
    let e: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((0.0..=1.0).contains(&e["weighted_f1"].as_f64().unwrap()));
    let o = ok(&["evaluate", "--test", "data/test.conll", "--pred", "data/test.conll"]);
    let e: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["weighted_f1"], 1.0);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), SMALL).unwrap();
    let o = lab(&["run", "--config", "c.json", "--out", "runs", "--seed", "3"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.contains("| Dataset | Corrupted | ECN Full |"), "{md}");
    let runs: Vec<_> = std::fs::read_dir(d.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let results = runs[0].join("results.csv");
    let csv = std::fs::read_to_string(&results).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("tiny,") && l.contains(",3,")), "{csv}");
    let o = lab(&["report", results.to_str().unwrap()], d);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), md);
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["presets"], dir.path());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l == "gmb-im-fixed-desk"));
    assert!(text.lines().any(|l| l == "sweep-k-desk"));
}
