use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qosa_cli::output::read_csv;

fn qosa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qosa")).args(args).env_remove("QOSA_SEED").output().unwrap()
}

fn stdout(args: &[&str]) -> Vec<u8> {
    let out = qosa(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/models").join(name)
}

#[test]
fn csv_written_to_file_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let p = path.to_str().unwrap();
    stdout(&["estimate", "--model", "gaussian-lognormal-2d", "--alpha", "0.2,0.8", "--samples", "20000", "--seed", "3", "--out", p]);
    let parsed = read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(parsed.schema_version, 1);
    assert_eq!(parsed.rows.len(), 2 * 3 * 2);
    assert!(parsed.rows.iter().all(|r| r.seed == Some(3) && r.n_samples == Some(20000) && r.std_error.is_some()));
    assert_eq!(parsed.config["seed"], 3);
}

#[test]
fn estimates_repeat_bit_for_bit() {
    let args = ["estimate", "--model", "exp-product", "--alpha", "0.3,0.6", "--samples", "20000", "--path", "knn"];
    let a = stdout(&[&args[..], &["--threads", "1"]].concat());
    let b = stdout(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(a, b);
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let run = |seed_env: &str, extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_qosa"))
            .args(["estimate", "--model", "laplace", "--samples", "10000", "--format", "json"])
            .args(extra)
            .env("QOSA_SEED", seed_env)
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    assert!(run("11", &[]).contains("\"seed\": 11"));
    assert!(run("11", &["--seed", "5"]).contains("\"seed\": 5"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": "laplace", "alpha": "0.2,0.4", "indices": ["qosa_first"]}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let rows = read_csv(stdout(&["analytic", "--config", c]).as_slice()).unwrap().rows;
    assert_eq!(rows.len(), 4);
    let rows = read_csv(stdout(&["analytic", "--config", c, "--alpha", "0.7"]).as_slice()).unwrap().rows;
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.model == "laplace" && r.alpha == Some(0.7)));
}

#[test]
fn model_file_matches_between_engines() {
    let m = model_path("additive-3d.json");
    let m = m.to_str().unwrap();
    let exact = read_csv(stdout(&["analytic", "--model", m, "--alpha", "0.25"]).as_slice()).unwrap().rows;
    let mc = read_csv(stdout(&["estimate", "--model", m, "--alpha", "0.25", "--samples", "50000"]).as_slice()).unwrap().rows;
    assert_eq!(exact.len(), 9);
    assert!(exact.iter().all(|r| r.model == "additive-3d"));
    for (a, b) in exact.iter().zip(&mc) {
        assert_eq!((&a.input, &a.index), (&b.input, &b.index));
        assert!((a.value - b.value).abs() < 5.0 * b.std_error.unwrap() + 1e-3, "{a:?} vs {b:?}");
    }
}

#[test]
fn bad_input_is_rejected() {
    assert!(!qosa(&["analytic", "--model", "laplace", "--alpha", "1.5"]).status.success());
    assert!(!qosa(&["analytic", "--model", "gaussian-linear-2d", "--rho", "2"]).status.success());
    assert!(!qosa(&["analytic", "--model", "no-such-model"]).status.success());
}

#[test]
fn validate_exit_code_matches_report() {
    let out = qosa(&["validate", "--suite", "fast"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 20);
    let all = checks.iter().all(|c| c["passed"] == true);
    assert_eq!(report["passed"], all);
    assert_eq!(out.status.success(), all);
}
