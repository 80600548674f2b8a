use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ircount-eval"))
        .args(args)
        .env_remove("IRCOUNT_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const GT: &str = r#"{"name": "gt", "records": [
  {"id": "a", "width": 64, "height": 64, "points": [[0.25, 0.25], [0.75, 0.75]]},
  {"id": "b", "width": 64, "height": 64, "points": [[0.5, 0.5]]},
  {"id": "c", "width": 64, "height": 64, "count": 0},
  {"id": "d", "width": 64, "height": 64, "boxes": [[0.5, 0.5, 0.1, 0.2]]}
]}"#;

const PRED: &str = r#"{"name": "model-x", "records": [
  {"id": "a", "width": 64, "height": 64, "points": [[0.25, 0.25, 0.9], [0.75, 0.75, 0.4]]},
  {"id": "b", "width": 64, "height": 64, "points": [[0.5, 0.5, 0.8], [0.1, 0.1, 0.2]]},
  {"id": "c", "width": 64, "height": 64, "count": 0},
  {"id": "d", "width": 64, "height": 64, "boxes": [[0.5, 0.5, 0.1, 0.2, 0.95]]}
]}"#;

#[test]
fn eval_count_json_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", GT);
    let pred = write(dir.path(), "pred.json", PRED);

    let out = bin(&["eval-count", "--gt", &gt, "--pred", &pred]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["model"], "model-x");
    assert_eq!(v["n"], 4);
    // b is overcounted by one
    assert_eq!(v["accuracy"], 0.75);
    assert_eq!(v["mae"], 0.25);

    let out = bin(&["eval-count", "--gt", &gt, "--pred", &pred, "--conf", "0.5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // a drops to one point, b drops its spurious one
    assert_eq!(v["accuracy"], 0.75);

    let md_path = dir.path().join("table.md");
    let out = bin(&[
        "eval-count", "--gt", &gt, "--pred", &pred, "--per-class", "--format", "markdown",
        "--model", "Mine", "--out", md_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let md = fs::read_to_string(&md_path).unwrap();
    assert!(md.contains("| Mine | 75.00 % | 0.250 | 0.250 |"), "{md}");
    assert!(md.contains("| Accuracy Count | 0 | 1 | 2 |"));
}

#[test]
fn eval_locate_reports_maed() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", GT);
    let pred = write(dir.path(), "pred.json", PRED);
    let out = bin(&["eval-locate", "--gt", &gt, "--pred", &pred]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    // only b contributes: one exact match plus one unmatched over max(1, 2)
    let expected = (0.0 + 1.0) / 2.0 / 4.0;
    assert!((v["maed"].as_f64().unwrap() - expected).abs() < 1e-12, "{v}");
    assert_eq!(v["images"], 4);
    assert_eq!(v["config"]["squared"], true);

    let out = bin(&["eval-locate", "--gt", &gt, "--pred", &pred, "--penalty", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_and_bad_flags_are_validation_errors() {
    let out = bin(&["eval-count", "--gt", "/nonexistent/gt.json", "--pred", "/nonexistent/p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let out = bin(&["eval-count", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let out = bin(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn schema_violations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"name": "x", "records": [{"id": "a", "width": 8, "height": 8, "points": [[1.5, 0.2]]}]}"#,
    );
    let gt = write(dir.path(), "gt.json", GT);
    let out = bin(&["eval-count", "--gt", &gt, "--pred", &bad]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn split_is_seeded_and_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<String> = (0..50)
        .map(|i| format!(r#"{{"id": "img{i}", "width": 8, "height": 8, "count": {}}}"#, i % 4))
        .collect();
    let manifest = write(
        dir.path(),
        "all.json",
        &format!(r#"{{"name": "all", "records": [{}]}}"#, records.join(",")),
    );
    let run = |tag: &str, seed: &str| {
        let tr = dir.path().join(format!("train{tag}.json"));
        let te = dir.path().join(format!("test{tag}.json"));
        let out = bin(&[
            "split", "--manifest", &manifest, "--train-count", "40", "--seed", seed,
            "--train-out", tr.to_str().unwrap(), "--test-out", te.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (json(&tr), json(&te))
    };
    let (tr1, te1) = run("1", "7");
    let (tr2, _) = run("2", "7");
    let (tr3, _) = run("3", "8");
    assert_eq!(tr1, tr2);
    assert_ne!(tr1, tr3);
    assert_eq!(tr1["records"].as_array().unwrap().len(), 40);
    assert_eq!(te1["records"].as_array().unwrap().len(), 10);
    assert_eq!(tr1["name"], "all-train");
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "11"), (&out_b, "11")] {
        let st = Command::new(env!("CARGO_BIN_EXE_ircount-eval"))
            .args(["synth", "--n", "3", "--out", out.to_str().unwrap()])
            .env("IRCOUNT_SEED", seed)
            .status()
            .unwrap();
        assert!(st.success());
    }
    assert_eq!(
        fs::read(out_a.join("map.cam")).unwrap(),
        fs::read(out_b.join("map.cam")).unwrap()
    );
}

#[test]
fn synth_then_locate_recovers_people() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let out = bin(&["synth", "--n", "4", "--seed", "3", "--out", scene.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&scene.join("manifest.json"));
    assert_eq!(manifest["records"][0]["count"], 4);

    let pts = dir.path().join("pts.json");
    let map = scene.join("map.cam");
    let out = bin(&[
        "locate-cam", "--map", map.to_str().unwrap(), "--count", "4", "--threshold", "27",
        "--out", pts.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&pts);
    assert_eq!(v["points"].as_array().unwrap().len(), 4);
    assert_eq!(v["branch"], "exact");
    assert_eq!(v["degenerate"], false);
}

#[test]
fn winsorize_clips_frame() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<String> = (0..10)
        .map(|r| (1..=10).map(|c| (r * 10 + c).to_string()).collect::<Vec<_>>().join(" "))
        .collect();
    let input = write(dir.path(), "in.frame", &format!("FRAME v1\n10 10\n{}\n", rows.join("\n")));
    let output = dir.path().join("out.frame");
    let out = bin(&["winsorize", "--lo", "5", "--hi", "95", &input, output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&output).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(2)
        .flat_map(|l| l.split_whitespace().map(|t| t.parse::<f64>().unwrap()))
        .collect();
    assert_eq!(values.len(), 100);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((min - 5.95).abs() < 1e-9 && (max - 95.05).abs() < 1e-9);

    let out = bin(&["winsorize", "--lo", "60", "--hi", "95", &input, output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convert_boxes_to_points_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", GT);
    let pts = dir.path().join("pts.json");
    let cnt = dir.path().join("cnt.json");
    assert!(bin(&["convert", "--in", &gt, "--out", pts.to_str().unwrap(), "--to", "points"]).status.success());
    assert!(bin(&["convert", "--in", &gt, "--out", cnt.to_str().unwrap(), "--to", "count"]).status.success());
    let p = json(&pts);
    assert_eq!(p["records"][3]["points"][0][0], 0.5);
    assert!(p["records"][3].get("boxes").is_none());
    let c = json(&cnt);
    let counts: Vec<u64> = c["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["count"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, vec![2, 1, 0, 1]);
}

#[test]
fn tune_threshold_writes_curve_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(
        dir.path(),
        "gt.json",
        r#"{"name": "gt", "records": [{"id": "a", "width": 8, "height": 8, "count": 1}]}"#,
    );
    let pred = write(
        dir.path(),
        "pred.json",
        r#"{"name": "p", "records": [{"id": "a", "width": 8, "height": 8,
            "boxes": [[0.2, 0.2, 0.1, 0.1, 0.9], [0.8, 0.8, 0.1, 0.1, 0.3]]}]}"#,
    );
    let curve = dir.path().join("curve.json");
    let svg = dir.path().join("curve.svg");
    let out = bin(&[
        "tune-threshold", "--gt", &gt, "--pred", &pred, "--out", curve.to_str().unwrap(),
        "--svg", svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c = ircount_eval::read_threshold_curve(&curve).unwrap();
    assert_eq!(c.thresholds.len(), 1001);
    // the first threshold dropping the 0.3 box
    assert!((c.best_threshold - 0.301).abs() < 1e-12);
    assert_eq!(c.best_accuracy, 1.0);
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn ablate_and_break_even() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<String> = (0..20)
        .map(|i| format!(r#"{{"id": "i{i}", "width": 8, "height": 8, "count": 1}}"#))
        .collect();
    let manifest = write(
        dir.path(),
        "m.json",
        &format!(r#"{{"name": "m", "records": [{}]}}"#, records.join(",")),
    );
    let out_dir = dir.path().join("subsets");
    let out = bin(&[
        "ablate", "--manifest", &manifest, "--fractions", "0.25:1.0:0.25", "--seed", "2",
        "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sizes: Vec<usize> = ["0.25", "0.50", "0.75", "1.00"]
        .iter()
        .map(|f| json(&out_dir.join(format!("subset_f{f}.json")))["records"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, vec![5, 10, 15, 20]);

    let curve = write(
        dir.path(),
        "curve.json",
        r#"{"label": "yolo", "fractions": [0.1, 0.2, 0.5], "accuracies": [0.70, 0.85, 0.90]}"#,
    );
    let out = bin(&["break-even", "--curve", &curve, "--target", "0.79"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["fraction"].as_f64().unwrap() - 0.16).abs() < 1e-12);

    let out = bin(&["break-even", "--curve", &curve, "--target", "0.95"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["fraction"].is_null());
}

#[test]
fn bench_external_counter() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bench.json");
    let out = bin(&[
        "bench", "--cmd", "while read l; do echo 2; done", "--warmup", "5", "--iters", "50",
        "--input", "x.frame", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out_path);
    assert_eq!(v["timed_iters"], 50);
    assert_eq!(v["warmup_iters"], 5);
    assert!(v["fps"].as_f64().unwrap() > 0.0);

    let out = bin(&["bench", "--cmd", "echo nonsense", "--iters", "3", "--warmup", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_renders_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = write(
        dir.path(),
        "rows.json",
        r#"[{"model": "A", "accuracy": 0.8013, "mse": 0.3, "mae": 0.2, "n": 10},
            {"model": "B", "accuracy": 0.5, "mse": 1.0, "mae": 0.5, "n": 10}]"#,
    );
    let out = bin(&["report", "--in", &rows, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("model,accuracy,mse,mae,n\n"));
    let out = bin(&["report", "--in", &rows]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("| A | 80.13 % | 0.300 | 0.200 |"));
}

#[test]
fn run_returns_codes_in_process() {
    assert_eq!(ircount_eval::run(["ircount-eval", "--version"]), 0);
    assert_eq!(ircount_eval::run(["ircount-eval", "synth"]), 1);
}
