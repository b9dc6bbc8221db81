use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ballvn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ballvn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn files_in(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(rd) => {
            let mut v: Vec<String> = rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
            v.sort();
            v
        }
        Err(_) => Vec::new(),
    }
}

#[test]
fn three_point_check_reports_negative_determinant() {
    let dir = tempfile::tempdir().unwrap();
    let o = ballvn(&["three-point-check", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let s = &v["report"]["summary"];
    assert!(s["pick_determinant"].as_f64().unwrap() < 0.0);
    assert!(s["restriction_norm"].as_f64().unwrap() > 1.0);
    assert_eq!(
        files_in(&dir.path().join("out")),
        ["three-point-check-0.csv", "three-point-check-0.json"]
    );
}

#[test]
fn two_by_two_fuzz_stays_below_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = ballvn(&["vn-fuzz", "--n", "2", "--budget", "1000", "--seed", "7", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!(v["report"]["summary"]["max_ratio"].as_f64().unwrap() <= 1.0 + 1e-6);
    assert_eq!(v["report"]["parameters"]["trials"], 1000);
    assert_eq!(v["provenance"]["seed"], 7);
}

#[test]
fn malformed_config_exits_1_without_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = \"seven\"\nout = \"out\"\n").unwrap();
    let o = ballvn(&["vn-fuzz", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(!dir.path().join("out").exists());

    std::fs::write(dir.path().join("typo.toml"), "out = \"out\"\n[vn_fuzz]\ntrails = 3\n").unwrap();
    let o = ballvn(&["vn-fuzz", "--config", "typo.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_input_file_exits_1_without_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "out = \"out\"\n[tuple]\nfile = \"absent.json\"\n").unwrap();
    let o = ballvn(&["spectrum", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn single_thread_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let o = ballvn(&["vn-fuzz", "--budget", "60", "--threads", threads, "--out", "out"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        ["vn-fuzz-0.csv", "vn-fuzz-0.json"].map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap())
    };
    let first = run("1");
    let second = run("1");
    assert_eq!(first, second, "identical single-thread runs differ");
    let pooled = run("2");
    assert_eq!(first[0], pooled[0], "rows depend on the thread count");
}

#[test]
fn config_file_supplies_command_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
command = "pick-norm"
seed = 3
out = "from-file"

[points]
values = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]

[function.polynomial]
d = 2
terms = [{ exp = [1, 1], coef = [2.0, 0.0] }]
"#;
    std::fs::write(dir.path().join("run.toml"), text).unwrap();
    let o = ballvn(&["--config", "run.toml", "--seed", "11"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["command"], "pick-norm");
    assert_eq!(v["provenance"]["seed"], 11);
    assert!(v["provenance"]["config_file_sha256"].is_string());
    // 2 z₁z₂ vanishes at both points
    assert!(v["report"]["summary"]["restriction_norm"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(files_in(&dir.path().join("from-file")), ["pick-norm-11.csv", "pick-norm-11.json"]);
}

#[test]
fn property_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[fc_check]\nstd_errors = 1e-9\nsamples = 2000\n").unwrap();
    let o = ballvn(&["fc-check", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout_json(&o)["status"], "property-violation");
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[fc_check]\ntaylor_order = 3\nsamples = 2000\n").unwrap();
    let o = ballvn(&["fc-check", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn precondition_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[tuple.random]\nscale = 4.0\n").unwrap();
    let o = ballvn(&["schur", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = ballvn(&["validate", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["report"]["summary"]["is_row_contraction"], false);
}

#[test]
fn tuple_file_round_trip_through_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let tuple = r#"{"d": 2, "n": 2, "entries": [
        [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.25, 0.0]]],
        [[[0.0, 0.5], [0.0, 0.0]], [[0.0, 0.0], [0.25, 0.0]]]
    ]}"#;
    std::fs::write(dir.path().join("t.json"), tuple).unwrap();
    std::fs::write(dir.path().join("c.toml"), "[tuple]\nfile = \"t.json\"\n").unwrap();
    let o = ballvn(&["spectrum", "--config", "c.toml", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["report"]["summary"]["spectral_radius"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(v["provenance"]["input_sha256"]["tuple"].is_string());
}
