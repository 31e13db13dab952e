use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use emal::experiment::{self, ExperimentConfig, RunOptions};
use emal::session::strip_timing;

const CONFIG: &str = r#"name = "cli-demo"

[dataset]
kind = "synthetic"
n_pairs = 300
seed = 3

[[session]]
name = "trees"
selector = "forest_qbc"
learner = { kind = "forest", n_trees = 5 }
termination = { max_iterations = 4 }

[[session]]
name = "random"
selector = "random"
learner = { kind = "forest", n_trees = 5 }
termination = { max_iterations = 4 }
"#;

fn emal(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_emal"));
    cmd.args(args).env_remove("EMAL_DATA_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_then_report_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = emal(&["run", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "summary.csv", "trees/run-0.csv", "trees/trace-0.jsonl", "random/run-0.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let o = emal(&["report", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("trees") && stdout.contains("random"));
    let f1 = fs::read_to_string(out.join("report/trees-f1.csv")).unwrap();
    let time = fs::read_to_string(out.join("report/trees-time.csv")).unwrap();
    assert_eq!(f1.lines().count(), time.lines().count());
    assert!(out.join("report/random-f1.csv").is_file());
}

#[test]
fn cli_and_library_give_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), CONFIG);
    let a = dir.path().join("cli");
    let o = emal(&["run", &cfg_path, "--seed", "11", "--out", a.to_str().unwrap()], &[]);
    assert!(o.status.success());

    let config = ExperimentConfig::load(Path::new(&cfg_path), None).unwrap();
    let b = dir.path().join("lib");
    experiment::run_experiment(
        &config,
        &RunOptions {
            seed: Some(11),
            jobs: None,
            out: Some(b.clone()),
        },
    )
    .unwrap();
    for f in ["trees/run-0.csv", "random/run-0.csv"] {
        let x = strip_timing(&fs::read_to_string(a.join(f)).unwrap()).unwrap();
        let y = strip_timing(&fs::read_to_string(b.join(f)).unwrap()).unwrap();
        assert_eq!(x, y, "{f}");
    }
    assert_eq!(
        fs::read_to_string(a.join("summary.csv")).unwrap(),
        fs::read_to_string(b.join("summary.csv")).unwrap()
    );
}

#[test]
fn incompatible_session_is_a_validation_error_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let body = CONFIG.replacen("selector = \"random\"", "selector = \"margin\"", 1);
    let cfg = write_config(dir.path(), &body);
    let o = emal(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config.toml:14:1:"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_key_and_bad_flags_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("seed = 3", "seed = 3\nsede = 4"));
    let o = emal(&["run", &cfg], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));
    assert_eq!(emal(&["run"], &[]).status.code(), Some(1));
    assert_eq!(emal(&["run", &cfg, "--jobs", "many"], &[]).status.code(), Some(1));
}

#[test]
fn report_on_empty_dir_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = emal(&["report", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn relative_dataset_paths_resolve_against_the_data_dir() {
    let data = tempfile::tempdir().unwrap();
    let mut left = String::from("id,name,city\n");
    let mut right = String::from("id,name,city\n");
    let mut gold = String::from("left,right\n");
    for i in 0..20 {
        left.push_str(&format!("l{i},acme widget {i},town{}\n", i % 4));
        right.push_str(&format!("r{i},Acme Widget No {i},town{}\n", i % 4));
        gold.push_str(&format!("l{i},r{i}\n"));
    }
    fs::write(data.path().join("left.csv"), left).unwrap();
    fs::write(data.path().join("right.csv"), right).unwrap();
    fs::write(data.path().join("gold.csv"), gold).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[dataset]
kind = "files"
left = "left.csv"
right = "right.csv"
gold = "gold.csv"
alignment = ["name", "city"]
blocking_threshold = 0.0

[[session]]
selector = "margin"
learner = { kind = "linear" }
termination = { max_iterations = 3 }
"#,
    );
    let out = dir.path().join("out");
    let missing = emal(&["run", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("left file"));

    let o = emal(&["run", &cfg, "--out", out.to_str().unwrap()], &[("EMAL_DATA_DIR", data.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = experiment::read_manifest(&out).unwrap();
    assert_eq!(manifest.dataset.pairs, 400);
    assert_eq!(manifest.dataset.matches, 20);
    assert_eq!(manifest.dataset.files.len(), 3);
    assert!(manifest.dataset.files.iter().all(|f| f.sha256.len() == 64));
}
