use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_potts-magic"));
    c.env_remove("POTTS_MAGIC_CACHE");
    c
}

fn run(args: &[&str], cache: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--cache-dir")
        .arg(cache)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn assert_manifest_digests(out: &Path) {
    let m = json(&out.join("manifest.json"));
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let bytes = fs::read(out.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(o["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert!(m["config"].is_object());
}

#[test]
fn groundstate_populates_cache_then_hits() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let args = ["groundstate", "--n", "8", "--theta", "0.7853981633974483"];
    let first = run(&args, cache.path(), out.path());
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("cache stored"));
    assert!(stdout(&first).contains("max bond dimension"));
    assert_eq!(fs::read_dir(cache.path()).unwrap().count(), 1);
    let second = run(&args, cache.path(), out.path());
    assert!(second.status.success());
    assert!(stdout(&second).contains("cache hit"));
    let summary = json(&out.path().join("groundstate.json"));
    assert_eq!(summary["cache_hit"], Value::Bool(true));
    assert_manifest_digests(out.path());
}

#[test]
fn cache_dir_from_environment() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .env("POTTS_MAGIC_CACHE", cache.path())
        .args(["groundstate", "--n", "6", "--theta", "0.3", "-q", "--out-dir"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(cache.path()).unwrap().count(), 1);
}

#[test]
fn invalid_theta_is_rejected_before_compute() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(&["groundstate", "--n", "16", "--theta", "6.283185307179586"], cache.path(), out.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("theta"));
    assert_eq!(fs::read_dir(cache.path()).map(|d| d.count()).unwrap_or(0), 0);
    assert!(!out.path().join("manifest.json").exists());
}

#[test]
fn missing_ground_state_without_compute_lists_the_command() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(
        &["scan-subsystem", "--n", "8", "--thetas", "0.4", "--ells", "1,2", "--no-compute"],
        cache.path(),
        out.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("potts-magic groundstate --n 8 --theta 0.4"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let o = bin().args(["scan-subsystem", "--n", "eight"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn twopoint_outputs_are_deterministic() {
    let cache = tempfile::tempdir().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["scan-twopoint", "--n", "12", "--thetas", "0.5,1.0", "--dxs", "1,2,3,4", "-q"];
    assert!(run(&args, cache.path(), a.path()).status.success());
    // second run reads the cached states
    assert!(run(&args, cache.path(), b.path()).status.success());
    let fa = fs::read(a.path().join("twopoint.csv")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("twopoint.csv")).unwrap());
    assert!(String::from_utf8(fa).unwrap().starts_with("theta,dx,mcc,dead\n"));
    assert_manifest_digests(a.path());
}

#[test]
fn toy_reports_the_zero_mana_edge() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(&["toy", "--alpha-points", "21"], cache.path(), out.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let alpha0 = json(&out.path().join("toy.json"))["alpha0"].as_f64().unwrap();
    assert!((alpha0 - 2.0 / 11.0).abs() < 1e-9, "{alpha0}");
    let csv = fs::read_to_string(out.path().join("toy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert_manifest_digests(out.path());
}

#[test]
fn mera_predict_asymptote() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(&["mera-predict", "--m-sq", "0.4", "--m-tri", "0.3", "--ells", "6,14,1000"], cache.path(), out.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&out.path().join("mera.json"))["asymptote"].as_f64(), Some(0.7));
    assert!(out.path().join("mera_curve.csv").is_file());
    assert!(!out.path().join("quasi_mera.csv").exists());
    let bad = run(&["mera-predict", "--m-sq", "-0.1"], cache.path(), out.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn meanfield_tables_and_transitions() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = run(&["meanfield", "--qs", "2,3,5", "--theta-points", "21"], cache.path(), out.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let tr = json(&out.path().join("meanfield.json"));
    let orders: Vec<&str> = tr.as_array().unwrap().iter().map(|t| t["order"].as_str().unwrap()).collect();
    assert_eq!(orders, ["second", "first", "first"]);
    let q3 = fs::read_to_string(out.path().join("meanfield_q3.csv")).unwrap();
    assert!(q3.starts_with("theta,alpha_star,z_expect,x_expect,energy,mana_per_vertex\n"));
    assert_eq!(q3.lines().count(), 22);
    let q2 = fs::read_to_string(out.path().join("meanfield_q2.csv")).unwrap();
    assert!(q2.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn selftest_passes_and_fault_injection_fails() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let ok = run(&["selftest", "--random-states", "40", "--seed", "3"], cache.path(), out.path());
    assert!(ok.status.success(), "{}", stdout(&ok));
    let again = run(&["selftest", "--random-states", "40", "--seed", "3"], cache.path(), out.path());
    assert_eq!(stdout(&ok), stdout(&again));
    let bad = run(&["selftest", "--random-states", "40", "--inject-fault"], cache.path(), out.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).contains("[FAIL] phase-point orthogonality n=1"));
    assert!(stderr(&bad).contains("phase-point orthogonality"));
}

#[test]
fn config_document_and_flag_precedence() {
    let cache = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("run.toml");
    fs::write(&cfg, "command = \"mera-predict\"\n[mera]\nk_max = 3\n[mera.params]\nm_sq = 0.1\nm_tri = 0.2\n").unwrap();
    let o = bin()
        .args(["mera-predict", "--m-sq", "0.3", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(out.path())
        .arg("--cache-dir")
        .arg(cache.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&out.path().join("mera.json"))["asymptote"].as_f64(), Some(0.3 + 0.2));
    let counts = fs::read_to_string(out.path().join("mera_counts.csv")).unwrap();
    assert_eq!(counts.lines().count(), 5);

    let wrong = bin().args(["toy", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(wrong.status.code(), Some(1));
    fs::write(&cfg, "[mera]\nkmax = 3\n").unwrap();
    let unknown = bin().args(["mera-predict", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("kmax"));
}
