use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rahbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rahbo")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "benchmark": "sine",
  "algorithm": "rahbo",
  "T": 3,
  "n_init": 4,
  "k": 3,
  "hyper_budget": 8,
  "candidate_grid": 64,
  "seeds": [5]
}"#;

#[test]
fn lists_benchmarks() {
    let o = rahbo(&["list-benchmarks"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.lines().any(|l| l.starts_with("sine\tdim=1")));
    assert!(s.lines().any(|l| l.starts_with("branin\tdim=2")));
}

#[test]
fn validate_echoes_normalized_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let o = rahbo(&["validate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["rounds"], 3);
    assert_eq!(echo["var_hi"], 0.8);
    assert_eq!(echo["kernel_f"], "fit");
}

#[test]
fn invalid_values_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("\"k\": 3", "\"k\": 1").replace("\"T\": 3,", "\"T\": 3,\n  \"alpha\": -0.5,");
    let cfg = write(tmp.path(), "bad.json", &bad);
    for cmd in ["validate", "run"] {
        let o = rahbo(&[cmd, "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2));
        let err = stderr(&o);
        assert!(err.contains("line 7: k"), "{err}");
        assert!(err.contains("line 5: alpha"), "{err}");
    }
}

#[test]
fn malformed_json_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", "{\n  \"benchmark\": \"sine\",\n  oops\n}");
    let o = rahbo(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let o = rahbo(&["validate", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_and_honours_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let out = tmp.path().join("out");
    let o = rahbo(&["run", "--config", &cfg, "--seeds", "1,2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace_seed_1.csv", "trace_seed_2.csv", "aggregate.csv", "metadata.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("trace_seed_5.csv").exists());
    let trace = fs::read_to_string(out.join("trace_seed_1.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn single_round_trace_has_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", &SMALL.replace("\"T\": 3", "\"T\": 1"));
    let out = tmp.path().join("one");
    let o = rahbo(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(out.join("trace_seed_5.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
}

#[test]
fn duplicate_seed_override_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL);
    let o = rahbo(&["run", "--config", &cfg, "--seeds", "3,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace(
        "\"seeds\": [5]",
        "\"seeds\": [5],\n  \"kernel_f\": {\"family\": \"squared_exponential\", \"lengthscales\": [1000.0], \"output_scale\": 1e300}",
    );
    let cfg = write(tmp.path(), "c.json", &body);
    let out = tmp.path().join("o");
    let o = rahbo(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed 5"), "{}", stderr(&o));
}

#[test]
fn compare_writes_tables_and_rejects_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let cfg = write(tmp.path(), "a.json", SMALL);
    let cfg_b = write(tmp.path(), "b.json", &SMALL.replace("\"rahbo\"", "\"gp_ucb\""));
    let cfg_c = write(tmp.path(), "c.json", &SMALL.replace("\"T\": 3", "\"T\": 2"));
    for (cfg, dir) in [(&cfg, &a), (&cfg_b, &b), (&cfg_c, &c)] {
        let o = rahbo(&["run", "--config", cfg, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let out = tmp.path().join("cmp");
    let o = rahbo(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--metric",
        "simple_regret",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("rahbo") && table.contains("gp_ucb"));
    for f in ["comparison.csv", "comparison.txt", "variance_histogram.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = rahbo(&["compare", a.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("T: 3 vs 2"), "{}", stderr(&o));
}
