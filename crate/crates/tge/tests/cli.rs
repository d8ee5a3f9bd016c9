use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tge::manifest::Manifest;

fn tge(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tge"));
    cmd.args(args).env("RUST_LOG", "warn");
    for key in ["TGE_POINTS", "TGE_SEED", "TGE_CONFIG", "TGE_MODEL", "TGE_METRICS"] {
        cmd.env_remove(key);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn synth(root: &Path) -> String {
    let data = root.join("data");
    let out = tge(&["synth", "--shapes", "2", "--levels", "1,2,3", "--out", data.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.join("manifest.json").to_string_lossy().into_owned()
}

#[test]
fn synth_writes_a_loadable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Manifest::load(Path::new(&synth(dir.path()))).unwrap();
    assert_eq!(manifest.objects.len(), 2);
    assert_eq!(manifest.scored_pairs(), 6);
    let objects = manifest.load_all().unwrap();
    let labels: Vec<f64> = objects[0].scored().map(|(_, _, s)| s).collect();
    assert!(labels.windows(2).all(|w| w[1] < w[0]), "{labels:?}");
}

#[test]
fn settings_resolve_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let input = dir.path().join("data/00-shape0/level1.ply");
    let reference = dir.path().join("data/00-shape0/reference.ply");
    let config = dir.path().join("tge.toml");
    std::fs::write(&config, "points = 300\nseed = 4\nmetrics = \"cd,uhd\"\n").unwrap();
    let (i, r, c) = (input.to_str().unwrap(), reference.to_str().unwrap(), config.to_str().unwrap());
    let points = |v: &Value| v["results"][0]["params"]["points"].as_u64().unwrap();

    let file = json(&tge(&["--config", c, "metric", i, r, "--json"], &[]));
    assert_eq!(points(&file), 300);
    assert_eq!(file["results"][0]["params"]["seed"], 4);
    assert_eq!(file["results"].as_array().unwrap().len(), 2);
    let env = json(&tge(&["metric", i, r, "--json"], &[("TGE_CONFIG", c), ("TGE_POINTS", "200")]));
    assert_eq!(points(&env), 200);
    let flag = json(&tge(&["--config", c, "metric", i, r, "--points", "100", "--json"], &[("TGE_POINTS", "200")]));
    assert_eq!(points(&flag), 100);
    let default = json(&tge(&["metric", i, r, "--json"], &[]));
    assert_eq!(default["results"].as_array().unwrap().len(), 6);

    std::fs::write(&config, "pointz = 3\n").unwrap();
    assert_eq!(tge(&["--config", c, "flops"], &[]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let (input, reference) = (d("data/00-shape0/level1.ply"), d("data/00-shape0/reference.ply"));

    assert_eq!(tge(&["metric", &d("missing.ply"), &reference], &[]).status.code(), Some(2));
    assert_eq!(tge(&["metric", &input, &reference, "--metrics", "cd,psnr"], &[]).status.code(), Some(3));
    assert_eq!(tge(&["metric", &input, &reference, "--bogus"], &[]).status.code(), Some(2));
    assert_eq!(tge(&["dataset-stats", &d("nowhere")], &[]).status.code(), Some(2));

    let ckpt = d("toy.ckpt");
    let out = tge(&["train", &manifest, "--model", "toy", "--epochs", "1", "--out", &ckpt], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(tge(&["score", &input, &reference, "--checkpoint", &ckpt, "--model", "default"], &[]).status.code(), Some(4));
    assert!(tge(&["score", &input, &reference, "--checkpoint", &ckpt, "--model", "toy"], &[]).status.success());
    assert_eq!(tge(&["score", &input, &reference, "--checkpoint", &d("missing.ckpt")], &[]).status.code(), Some(2));
    assert_eq!(tge(&["score", "--checkpoint", &ckpt], &[]).status.code(), Some(1));
}

#[test]
fn train_log_and_eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let summary = json(&tge(
        &["train", &manifest, "--model", "toy", "--epochs", "4", "--checkpoint-every", "2", "--out", &d("m.ckpt"), "--log", &d("log.jsonl"), "--json"],
        &[],
    ));
    assert_eq!(summary["epochs"], 4);
    assert_eq!(summary["samples"], 6);
    let log = std::fs::read_to_string(d("log.jsonl")).unwrap();
    let lines: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["wall_time_s"].is_number() && l["loss"].is_number()));

    let report = json(&tge(&["eval", &manifest, "--checkpoint", &d("m.ckpt"), "--csv", &d("eval.csv"), "--json"], &[]));
    assert_eq!(report["folds"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(d("eval.csv")).unwrap();
    assert!(csv.lines().count() >= 4, "{csv}");

    let cv = json(&tge(&["eval", &manifest, "--cross-train", "--model", "toy", "--epochs", "2", "--json"], &[]));
    assert_eq!(cv["metric"], "tge-cv");
    let scores = json(&tge(&["score", "--manifest", &manifest, "--checkpoint", &d("m.ckpt"), "--json"], &[]));
    assert_eq!(scores["scores"].as_array().unwrap().len(), 6);
}

#[test]
fn flops_reports_the_estimate() {
    let v = json(&tge(&["flops", "--json"], &[]));
    assert_eq!(v["estimate"]["n_points"], 10_000);
    assert!(v["estimate"]["gflops"].as_f64().unwrap() > 0.0);
    assert!((v["grouped_scaling_at_2x_points"].as_f64().unwrap() - 2.0).abs() < 0.02);
    let text = tge(&["flops"], &[]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("14.7"));
}
