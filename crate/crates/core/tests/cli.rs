use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use labelnoise::data::{load_csv, CsvSchema};
use labelnoise::model::ModelState;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelnoise"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_then_inject() {
    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean.csv");
    let noisy = dir.path().join("noisy.csv");
    let mask = dir.path().join("mask.csv");

    let out = run(&[
        "generate",
        "--n-examples",
        "200",
        "--n-features",
        "4",
        "--seed",
        "3",
        "--out",
        p(&clean),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let data = load_csv(&clean, &CsvSchema::default()).unwrap();
    assert_eq!(data.len(), 200);
    assert_eq!(data[0].features.len(), 4);

    let out = run(&[
        "inject",
        "--input",
        p(&clean),
        "--p1",
        "0.3",
        "--noise-mode",
        "exact-count",
        "--seed",
        "1",
        "--out",
        p(&noisy),
        "--mask-out",
        p(&mask),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&noisy).unwrap();
    assert!(text.starts_with("id,label,clean_label,prior_corrupted,"));
    let flipped = text
        .lines()
        .skip(1)
        .filter(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f[1] != f[2]
        })
        .count();
    assert_eq!(flipped, 60);
    assert_eq!(fs::read_to_string(&mask).unwrap().lines().count(), 201);
}

#[test]
fn derive_p2_reports_anchor_rate() {
    let out = run(&["derive-p2", "--k1", "0", "--k2", "9", "--n", "18", "--json"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["derivation"]["p2"].as_f64().unwrap(), 0.25);

    let dir = TempDir::new().unwrap();
    let history = dir.path().join("runs.txt");
    fs::write(&history, "17\n18\n19\n").unwrap();
    let out = run(&["derive-p2", "--history", p(&history), "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["derivation"]["n"], 18);
    assert_eq!(v["derivation"]["k2"], 9);
}

#[test]
fn train_writes_report_epochs_and_checkpoint() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let epochs = dir.path().join("epochs.csv");
    let ckpt = dir.path().join("model.ckpt");
    let out = run(&[
        "train",
        "--p1",
        "0.1",
        "--p2",
        "0.25",
        "--seed",
        "5",
        "--out",
        p(&report),
        "--epochs-out",
        p(&epochs),
        "--checkpoint",
        p(&ckpt),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let n_actual = v["n_actual"].as_u64().unwrap();
    assert_eq!(v["epochs"].as_array().unwrap().len() as u64, n_actual);
    assert_eq!(
        fs::read_to_string(&epochs).unwrap().lines().count() as u64,
        n_actual + 1
    );
    let model = ModelState::load(&ckpt).unwrap();
    assert_eq!(model.params.len(), 17);
}

#[test]
fn sweep_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "kind = \"prior_only\"\np1_values = [0.0, 0.2]\nseeds = [0, 1]\n\n[base]\nmax_epochs = 5\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = run(&["sweep", p(&config), "--out", p(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);
    assert!(dir.path().join("out.summary.csv").exists());
    assert!(dir.path().join("out.json").exists());
}

#[test]
fn validation_errors_exit_1() {
    assert_eq!(
        code(&run(&["derive-p2", "--k1", "9", "--k2", "9", "--n", "18"])),
        1
    );
    assert_eq!(code(&run(&["train", "--p2", "1.5"])), 1);
    assert_eq!(
        code(&run(&["train", "--model", "mlp", "--init-scale", "0"])),
        1
    );
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["derive-p2"])), 1);

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,label,f0\n0,1,0.5\n1,7,0.2\n").unwrap();
    let out = run(&[
        "inject",
        "--input",
        p(&bad),
        "--p1",
        "0.1",
        "--out",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "[optimizer]\nlr = 0.001\n").unwrap();
    let out = run(&["train", "--config", p(&typo)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `lr`"));

    let sweep = dir.path().join("s.toml");
    fs::write(
        &sweep,
        "kind = \"combined\"\np1_values = [0.1]\nseeds = [0]\n",
    )
    .unwrap();
    assert_eq!(code(&run(&["sweep", p(&sweep)])), 1);
}

#[test]
fn runtime_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = run(&[
        "inject",
        "--input",
        p(&missing),
        "--p1",
        "0.1",
        "--out",
        p(&dir.path().join("o.csv")),
    ]);
    assert_eq!(code(&out), 2);
    let out = run(&["sweep", p(&dir.path().join("missing.toml"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&run(&["--help"])), 0);
}
