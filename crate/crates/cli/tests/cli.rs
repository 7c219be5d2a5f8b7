//! The binary's exit codes, stdout and on-disk layout.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layercluster")).args(args).output().expect("binary runs")
}

fn only_run_dir(root: &Path) -> std::path::PathBuf {
    let dirs: Vec<_> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

#[test]
fn predict_prints_spacing() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["predict", "--n", "2", "--eps", "0.01", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let value: f64 = stdout
        .split(", ")
        .find_map(|kv| kv.trim().strip_prefix("spacing_2_mean = "))
        .expect("spacing reported")
        .trim()
        .parse()
        .unwrap();
    assert!((value - 5.2585).abs() < 1e-4, "{stdout}");
    let dir = only_run_dir(out.path());
    for file in ["config.toml", "record.json", "summary.md", "summary.json", "eps_1.0000e-2/placement.csv"] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
}

#[test]
fn verify_exit_code_and_report() {
    let out = tempfile::tempdir().unwrap();
    let runs = out.path().join("runs");
    let o = run(&["verify", "--criteria", "4", "--out", runs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("criterion 4"));

    let dir = only_run_dir(&runs);
    let summary = out.path().join("summary");
    let r = run(&["report", dir.to_str().unwrap(), "--out", summary.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let md = std::fs::read_to_string(summary.join("summary.md")).unwrap();
    assert!(md.contains("## Placement\n\nnot run"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(summary.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
}

#[test]
fn bad_input_exits_with_two() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["predict", "--eps", "0.01,0.02", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps"));
    let cfg = out.path().join("bad.toml");
    std::fs::write(&cfg, "kind = \"predict\"\nn = 1\neps = [0.01]\nbogus = 3\n").unwrap();
    let o = run(&["predict", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["report", out.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
