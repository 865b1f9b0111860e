use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graspfit"));
    c.env_remove("GRASPFIT_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Fixture set shared by the tests in this file.
fn fixtures() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = run(&["fixtures", "--out", s(dir.path()), "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
    .path()
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const UNIT_CUBE: &str = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

#[test]
fn code_of_unit_cube_with_half_bone() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("cube.obj");
    std::fs::write(&cube, UNIT_CUBE).unwrap();
    let out = run(&["code", "--object", s(&cube), "--bone", "0.5"]);
    assert!(out.status.success());
    let code: Vec<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(code.len(), 3);
    for (got, want) in code.iter().zip([2.0, 1.0, 1.0]) {
        assert!((got - want).abs() < 1e-9, "{code:?}");
    }
}

#[test]
fn negative_bone_is_a_contract_violation() {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("cube.obj");
    std::fs::write(&cube, UNIT_CUBE).unwrap();
    let out = run(&["code", "--object", s(&cube), "--bone=-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = run(&["gate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn fixtures_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        assert!(run(&["fixtures", "--out", s(d.path()), "--seed", "7"]).status.success());
    }
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
}

#[test]
fn gate_follows_labels() {
    let fx = fixtures();
    let labels: std::collections::BTreeMap<String, bool> =
        serde_json::from_slice(&std::fs::read(fx.join("labels.json")).unwrap()).unwrap();
    assert_eq!(labels["flat"], false);
    assert_eq!(labels["curled"], true);
    for (stem, expected) in labels {
        let out = run(&["gate", "--hand", s(&fx.join("hands").join(format!("{stem}.obj")))]);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["accepted"], expected, "{stem}");
    }
}

#[test]
fn config_file_overrides_flags() {
    let fx = fixtures();
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("gate.json");
    std::fs::write(&cfg, r#"{"threshold": 0.0}"#).unwrap();
    let out = run(&["gate", "--hand", s(&fx.join("hands/flat")), "--threshold", "0.9", "--config", s(&cfg)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["threshold"], 0.0);
    assert_eq!(v["accepted"], true);

    std::fs::write(&cfg, r#"{"threshold": 0.0, "bogus": 1}"#).unwrap();
    let out = run(&["gate", "--hand", s(&fx.join("hands/flat")), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_catalog_exits_1_naming_the_path() {
    let fx = fixtures();
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere/catalog.json");
    let out = run(&[
        "pipeline",
        "--hand",
        s(&fx.join("hands/curled")),
        "--catalog",
        s(&missing),
        "--exemplars",
        s(&fx.join("exemplars.json")),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/catalog.json"));
}

fn pipeline_args<'a>(fx: &'a Path, hand: &'a str, out: &'a Path) -> Vec<String> {
    [
        "pipeline",
        "--hand",
        s(&fx.join("hands").join(hand)),
        "--catalog",
        s(&fx.join("catalog.json")),
        "--exemplars",
        s(&fx.join("exemplars.json")),
        "--out",
        s(out),
        "--seed",
        "7",
    ]
    .iter()
    .map(|a| a.to_string())
    .collect()
}

#[test]
fn flat_hand_writes_rejection_and_exits_0() {
    let fx = fixtures();
    let dir = TempDir::new().unwrap();
    let out = bin().args(pipeline_args(fx, "flat", dir.path())).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rej: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("rejection.json")).unwrap()).unwrap();
    assert_eq!(rej["accepted"], false);
    assert!(dir.path().join("manifest.json").is_file());
    assert!(!dir.path().join("sample_00").exists());
}

#[test]
fn pipeline_writes_samples_and_manifest() {
    let fx = fixtures();
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"fit": {"max_iters": 150}}"#).unwrap();
    let out_dir = dir.path().join("run");
    let mut args = pipeline_args(fx, "curled", &out_dir);
    args.extend(["--config".into(), s(&cfg).into(), "--max-iters".into(), "4000".into()]);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..3 {
        let sd = out_dir.join(format!("sample_{k:02}"));
        for f in ["posed.obj", "sample.json", "fit_report.json", "metrics.json"] {
            assert!(sd.join(f).is_file(), "{k}/{f}");
        }
        let fit: serde_json::Value =
            serde_json::from_slice(&std::fs::read(sd.join("fit_report.json")).unwrap()).unwrap();
        // the config file wins over the flag
        assert!(fit["iterations"].as_u64().unwrap() <= 150);
        let rec: serde_json::Value = serde_json::from_slice(&std::fs::read(sd.join("sample.json")).unwrap()).unwrap();
        assert_eq!(rec["seed"], 7 + k as u64);
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["sample_seeds"], serde_json::json!([7, 8, 9]));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["inputs"].as_object().unwrap().len() >= 4);
    assert!(m["timing"]["total_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_eval_and_batch() {
    let fx = fixtures();
    let dir = TempDir::new().unwrap();
    let hand = fx.join("hands/curled");
    let object = fx.join("hands/curled_object.obj");
    let posed = dir.path().join("posed.obj");
    let report = dir.path().join("fit.json");
    let out = run(&[
        "fit", "--hand", s(&hand), "--object", s(&object), "--max-iters", "40",
        "--mesh-out", s(&posed), "--out", s(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(fit["trace"].as_array().unwrap().len(), 40);

    let out = run(&["eval", "--hand", s(&hand), "--object", s(&object)]);
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(m["penetration_depth"].as_f64().unwrap() < 0.05);
    assert_eq!(m["contact_region_coverage"], 6);

    let csv = dir.path().join("batch.csv");
    let out = run(&[
        "eval-batch", "--hand", s(&hand), "--objects", s(&object), s(&posed), "--csv", s(&csv), "--jobs", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("id,sd_proxy_cm"));
}

#[test]
fn select_and_catalog_build() {
    let fx = fixtures();
    let dir = TempDir::new().unwrap();
    let index = dir.path().join("catalog.json");
    let out = run(&["catalog-build", "--dir", s(&fx.join("objects")), "--out", s(&index)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let built: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(built["entries"].as_u64().unwrap() > 0);

    let mesh = dir.path().join("sel.obj");
    let (hand, exemplars) = (fx.join("hands/curled"), fx.join("exemplars.json"));
    let args = [
        "select", "--hand", s(&hand), "--catalog", s(&index),
        "--exemplars", s(&exemplars), "--seed", "3", "--mesh-out", s(&mesh),
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert!(mesh.is_file());
}
