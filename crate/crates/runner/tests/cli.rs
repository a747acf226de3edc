use std::path::Path;
use std::process::{Command, Output};

fn ptt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptt")).args(args).output().expect("spawn ptt")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn default_config_parses_back() {
    let out = ptt(&["default-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    ptt_runner::RunConfig::from_json(&text).unwrap();
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"p": 7.0}"#);
    let out = ptt(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let missing = ptt(&["run", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"n": 8, "t_end": 0.05, "scenario": {"kind": "small_data", "delta0": 1e-3}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = ptt(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "history.csv", "particles.csv", "report.json", "final_state.bin"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    let history = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert!(history.lines().count() >= 3);
    let state = ptt_runner::run::read_state(&out_dir.join("final_state.bin")).unwrap();
    assert!((state.t - 0.05).abs() < 1e-12);
}

#[test]
fn unexpected_blowup_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // Uniform negative trace far below the special solution.
    let modes = (0..3)
        .map(|d| {
            let c = [0, 3, 5][d];
            format!(r#"{{"field": "sigma", "component": {c}, "k": [0, 0, 0], "amplitude": -50.0}}"#)
        })
        .collect::<Vec<_>>()
        .join(",");
    let text = format!(r#"{{"n": 8, "t_end": 1.0, "scenario": {{"kind": "custom", "modes": [{modes}]}}}}"#);
    let cfg = write(dir.path(), "cfg.json", &text);
    let out = ptt(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn verify_suite_reports_json() {
    let out = ptt(&["verify", "--suite", "operators", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v.as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn probe_command_emits_reports() {
    let out = ptt(&[
        "probe", "--family", "product", "--p", "2", "--p", "3", "--samples", "2", "--n", "16", "--cutoff", "0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
}
