use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn idrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idrank"))
        .args(args)
        .env_remove("IDRANK_SEED")
        .output()
        .expect("failed to run idrank")
}

fn ok(args: &[&str]) -> String {
    let out = idrank(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_profile(dir: &Path, name: &str, d: &[f64]) -> std::path::PathBuf {
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let p = dir.join(name);
    let body = serde_json::json!({ "d": d, "mean_id": mean });
    std::fs::write(&p, body.to_string()).unwrap();
    p
}

#[test]
fn estimate_helix_with_mle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("helix.csv");
    ok(&["synth", "--kind", "helix", "--n", "2000", "--seed", "1", "--out", path(&csv)]);
    let est = json(&["estimate", "--input", path(&csv), "--method", "mle"]);
    let d = est["d_hat"].as_f64().unwrap();
    assert!((0.9..=1.2).contains(&d), "{d}");
    assert_eq!(est["method"], "mle");
    assert_eq!(est["n_used"], 2000);
}

#[test]
fn synth_toy5_has_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy.csv");
    ok(&["synth", "--kind", "toy5", "--out", path(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0], "0,0");
    assert_eq!(rows[4], "2,2");
}

#[test]
fn plan_on_flat_profile() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_profile(dir.path(), "p.json", &[9.5; 13]);
    let plan = json(&[
        "plan", "--profile", path(&p), "--offset", "1", "--alpha-ratio", "32", "--blocks", "12",
        "--d-model", "768",
    ]);
    assert_eq!(plan["schema_version"], 1);
    assert!(plan["ranks"].as_array().unwrap().iter().all(|r| r == 1));
    assert!(plan["alpha"].as_array().unwrap().iter().all(|a| a == 32.0));
    assert_eq!(plan["total_trainable_params"], 73_728);
    assert_eq!(plan["rounding_mode"], "ceil");
}

#[test]
fn plan_infers_blocks_and_checks_them() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_profile(dir.path(), "p.json", &[2.0, 4.5, 4.0]);
    let plan = json(&["plan", "--profile", path(&p), "--d-model", "4"]);
    assert_eq!(plan["ranks"], serde_json::json!([4, 1]));
    assert_eq!(plan["total_trainable_params"], 5 * 4 * 8);

    let out = idrank(&["plan", "--profile", path(&p), "--blocks", "12", "--json-errors"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let diag: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(diag["error"]["code"], "LengthMismatch");
}

#[test]
fn help_lists_defaults() {
    let estimate = ok(&["estimate", "--help"]);
    assert!(estimate.contains("[default: 0.1]"));
    assert!(estimate.contains("[default: regression]"));
    let plan = ok(&["plan", "--help"]);
    for needle in ["[default: 1]", "[default: 32]", "[default: ceil]", "[default: 768]"] {
        assert!(plan.contains(needle), "plan --help lacks {needle}");
    }
    let profile = ok(&["profile", "--help"]);
    assert!(profile.contains("[default: mean]"));
    assert!(profile.contains("[default: 20000]"));
}

#[test]
fn usage_errors_exit_two() {
    let out = idrank(&["estimate", "--discard-fraction", "1.5", "--input", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = idrank(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = idrank(&["plan", "--json-errors"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let diag: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(diag["error"]["code"], "UsageError");
}

#[test]
fn data_errors_exit_one_with_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = idrank(&["estimate", "--input", path(&missing), "--json-errors"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "));
    let diag: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(diag["error"]["code"], "IoError");

    let bad = dir.path().join("bad.ghs");
    std::fs::write(&bad, b"GHS2 not really").unwrap();
    let out = idrank(&["profile", "--input", path(&bad), "--json-errors"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let diag: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(diag["error"]["code"], "FormatError");
}

#[test]
fn emitted_curve_reproduces_the_slope() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("plane.csv");
    let curve = dir.path().join("curve.csv");
    ok(&[
        "synth", "--kind", "hyperplane", "--dim", "3", "--ambient", "8", "--n", "3000", "--out",
        path(&csv),
    ]);
    let est = json(&["estimate", "--input", path(&csv), "--emit-curve", path(&curve)]);
    let mut reader = csv::Reader::from_path(&curve).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["log_mu", "neg_log_survival"]);
    let (mut sxy, mut sxx, mut rows) = (0.0, 0.0, 0);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[0].parse().unwrap();
        let y: f64 = rec[1].parse().unwrap();
        sxy += x * y;
        sxx += x * x;
        rows += 1;
    }
    assert_eq!(rows, est["n_used"].as_u64().unwrap());
    let d = est["d_hat"].as_f64().unwrap();
    assert!(((sxy / sxx) - d).abs() <= 1e-9 * d, "{} vs {d}", sxy / sxx);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["synth", "--kind", "hypercube", "--dim", "3", "--ambient", "6", "--n", "500", "--seed", "4"]);
    let b = ok(&["synth", "--kind", "hypercube", "--dim", "3", "--ambient", "6", "--n", "500", "--seed", "4"]);
    assert_eq!(a, b);
    let c = ok(&["synth", "--kind", "hypercube", "--dim", "3", "--ambient", "6", "--n", "500", "--seed", "5"]);
    assert_ne!(a, c);

    let csv = dir.path().join("cube.csv");
    std::fs::write(&csv, &a).unwrap();
    let args = ["stability", "--input", path(&csv), "--scales", "3", "--seed", "11"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn seed_from_environment() {
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_idrank"));
        cmd.args(["synth", "--kind", "helix", "--n", "20"]).env_remove("IDRANK_SEED");
        if let Some(s) = seed {
            cmd.env("IDRANK_SEED", s);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("3")), ok(&["synth", "--kind", "helix", "--n", "20", "--seed", "3"]).into_bytes());
    assert_ne!(run(Some("3")), run(None));
}

#[test]
fn profile_and_diff_from_ghs() {
    let dir = tempfile::tempdir().unwrap();
    let line = dir.path().join("line.ghs");
    let plane = dir.path().join("plane.ghs");
    ok(&["synth", "--kind", "hyperplane", "--dim", "1", "--ambient", "5", "--n", "1500", "--format", "ghs", "--out", path(&line)]);
    ok(&["synth", "--kind", "hyperplane", "--dim", "2", "--ambient", "5", "--n", "1500", "--format", "ghs", "--out", path(&plane)]);

    let p1 = dir.path().join("p1.json");
    let p2 = dir.path().join("p2.json");
    ok(&["profile", "--input", path(&line), "--out", path(&p1)]);
    ok(&["profile", "--input", path(&plane), "--method", "mle", "--out", path(&p2)]);
    let prof: Value = serde_json::from_str(&std::fs::read_to_string(&p2).unwrap()).unwrap();
    let d = prof["d"][0].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&d), "{d}");

    let diff = json(&["diff", "--before", path(&p1), "--after", path(&p2)]);
    assert!(diff["delta"][0].as_f64().unwrap() > 0.5);
    assert_eq!(diff["layers_compressed"], serde_json::json!([]));

    let stab = json(&["profile", "--input", path(&plane), "--stability", "--scales", "3", "--repeats", "3"]);
    assert_eq!(stab["stability"][0]["subset_sizes"], serde_json::json!([1500, 750, 375]));
}

#[test]
fn pooling_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    ok(&["synth", "--kind", "helix", "--n", "300", "--out", path(&csv)]);
    let cloud = idrank_core::PointCloud::read_csv_path(&csv).unwrap();
    let meta = idrank_core::Metadata {
        pooling: "last-token".into(),
        ..Default::default()
    };
    let set = idrank_core::HiddenStateSet::from_clouds(&[cloud], meta).unwrap();
    let ghs = dir.path().join("c.ghs");
    idrank_core::write_ghs(&set, &ghs).unwrap();

    let out = idrank(&["profile", "--input", path(&ghs)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("last-token"));
    ok(&["profile", "--input", path(&ghs), "--pooling", "last-token"]);
}
