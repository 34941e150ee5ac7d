use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pshflat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pshflat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn ball_flatten_passes_and_writes_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = pshflat(
        &["flatten", "--domain", "ball", "--q", "3", "--samples", "4"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let r = report(dir.path());
    assert_eq!(r["schema_version"], "1.0.0");
    assert_eq!(r["seed"], 42);
    assert_eq!(r["passed"], true);
    let csv = std::fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
    let a2: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((a2 + 0.5).abs() < 1e-9, "{a2}");
}

#[test]
fn constant_radial_profile_is_solved_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = pshflat(
        &["solve-radial", "--profile", "const:1", "--n", "3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert!(
        r["results"]["verification"]["max_residual"]
            .as_f64()
            .unwrap()
            <= 1e-8
    );
    assert!(r["results"]["exact_error"].as_f64().unwrap() <= 1e-8);
    assert!(dir.path().join("radial.csv").exists());
}

#[test]
fn malformed_expression_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let out = pshflat(&["flatten", "--domain", "abs2(z1) + * 2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = report(dir.path())["error"].as_str().unwrap().to_string();
    assert!(err.contains("syntax error at position 11"), "{err}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("position"));
}

#[test]
fn failed_certificate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = pshflat(
        &["check-tr", "--domain", "levi-flat", "--samples", "5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL totally_real"));
}

#[test]
fn runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "map-check",
        "--map",
        "ball-auto:0.3,0.1i",
        "--seed",
        "7",
        "--samples",
        "20",
    ];
    assert_eq!(pshflat(&args, a.path()).status.code(), Some(0));
    assert_eq!(pshflat(&args, b.path()).status.code(), Some(0));
    let strip = |mut v: Value| {
        v["timestamp"] = Value::Null;
        v["config"]["out"] = Value::Null;
        v
    };
    assert_eq!(strip(report(a.path())), strip(report(b.path())));
    for t in ["map_checks.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(t)).unwrap(),
            std::fs::read(b.path().join(t)).unwrap()
        );
    }
}

#[test]
fn config_file_merges_with_flags_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "command = \"solve-radial\"\nprofile = \"const:8\"\nn = 3\nseed = 5\n",
    )
    .unwrap();
    let out = pshflat(
        &["--config", cfg.to_str().unwrap(), "--seed", "9"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(dir.path());
    assert_eq!(r["seed"], 9);
    assert_eq!(r["config"]["profile"], "const:8");

    std::fs::write(&cfg, "command = \"solve-radial\"\nladder_t0 = 0.1\n").unwrap();
    let out = pshflat(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ladder_t0"));
}

#[test]
fn out_of_range_flag_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = pshflat(&["flatten", "--domain", "ball", "--q", "9"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(
        report(dir.path())["error"]
            .as_str()
            .unwrap()
            .contains("`q`"),
        "{:?}",
        report(dir.path())["error"]
    );
}
