use std::f64::consts::PI;
use std::process::{Command, Output};

use serde_json::Value;

fn dgge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgge"))
        .args(args)
        .env_remove("DGGE_CONFIG")
        .env_remove("DGGE_DELTA")
        .env_remove("DGGE_TAU")
        .output()
        .expect("run dgge")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn params_at_third_root() {
    let tau = 2.1490756970007664;
    let v = json(&dgge(&["params", "--delta", "2.5", "--tau", &tau.to_string()]));
    assert_eq!(v["regime"], "gapless");
    assert!((v["gamma_re"].as_f64().unwrap() - PI / 3.0).abs() < 1e-12);
    assert_eq!(v["root_of_unity"], "2,1");
}

#[test]
fn gapped_staggered_vanishes() {
    let v = json(&dgge(&["stagmag", "--delta", "2.5", "--tau", "1.0"]));
    assert_eq!(v["regime"], "gapped");
    assert!(v["abs"].as_f64().unwrap() < 1e-8);
}

#[test]
fn free_line_keeps_neel_order() {
    let v = json(&dgge(&["free", "--mode", "asymptotic", "--delta", "2", "--tau", "3.14159265"]));
    assert!((v["magnitude"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let missing = dgge(&["stagmag", "--tau", "1.0"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_flag = dgge(&["stagmag", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    let stalled = dgge(&["stagmag", "--delta", "2.5", "--tau", "1.0", "--max-iter", "1"]);
    assert_eq!(stalled.status.code(), Some(2));
    assert!(dgge(&["--help"]).status.success());
}

#[test]
fn config_file_sits_under_flags_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("knobs.json");
    std::fs::write(&cfg, r#"{"delta": 2.5, "tau": 0.5}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = json(&dgge(&["params", "--config", cfg]));
    assert_eq!(from_file["tau"].as_f64(), Some(0.5));

    let flag = json(&dgge(&["params", "--config", cfg, "--tau", "0.75"]));
    assert_eq!(flag["tau"].as_f64(), Some(0.75));
    assert_eq!(flag["delta"].as_f64(), Some(2.5));

    let out = Command::new(env!("CARGO_BIN_EXE_dgge"))
        .args(["params", "--config", cfg])
        .env("DGGE_TAU", "0.6")
        .output()
        .unwrap();
    assert_eq!(json(&out)["tau"].as_f64(), Some(0.6));

    std::fs::write(dir.path().join("bad.json"), r#"{"delta": 2.5, "bogus": 1}"#).unwrap();
    let bad = dgge(&["params", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn sweep_output_is_deterministic() {
    let args = ["stagmag-sweep", "--delta", "2.5", "--tau-min", "0.5", "--tau-max", "2.2", "--tau-points", "6"];
    let a = dgge(&args);
    let b = dgge(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("tau,regime,gamma_over_pi,staggered,uniform,sum_rule,status\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn reproduce_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dgge(&["reproduce", "--figure", "fig2", "--grid", "64", "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# delta=3"));
    assert_eq!(lines.next(), Some("tau,lambda,rho_1,rho_2"));
    assert_eq!(lines.count(), 3 * 64);
}
