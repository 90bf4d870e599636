//! End-to-end tests against the built binary: report shapes, exit codes,
//! cache idempotence and resume, tampering, and replay.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn r2cs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_r2cs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn bounds_lists_the_feasible_fields() {
    let v = stdout_json(&r2cs(&["bounds", "--n", "4"]));
    let qs: Vec<u64> = v["witnesses"]["feasible_q"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert_eq!(qs, vec![3, 5, 7, 9, 11, 13, 17, 19, 23, 25, 27, 29]);
    assert_eq!(v["counts"]["feasible_count"], 12);
}

#[test]
fn bounds_rejects_degree_one() {
    let out = r2cs(&["bounds", "--n", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sublines_counts_and_formats() {
    let v = stdout_json(&r2cs(&["sublines", "--p", "3", "--n", "3"]));
    assert_eq!(v["counts"]["pair_count"], 36);
    assert_eq!(v["counts"]["subline_count"], 12);
    assert_eq!(v["witnesses"]["pairs"].as_array().unwrap().len(), 36);

    let text = r2cs(&["sublines", "--p", "3", "--n", "3", "--format", "text"]);
    let s = String::from_utf8(text.stdout).unwrap();
    assert!(s.contains("subline_count: 12"), "text report: {s}");

    let csv = r2cs(&["sublines", "--p", "3", "--n", "3", "--format", "csv"]);
    let s = String::from_utf8(csv.stdout).unwrap();
    assert!(s.starts_with("stage,p,e,n,"), "csv header: {s}");
    assert!(s.contains("sublines,3,1,3,36,12"), "csv row: {s}");
}

#[test]
fn infeasible_fields_exit_two_unless_forced() {
    let out = r2cs(&["sublines", "--p", "31", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("outside the feasible range"), "stderr: {err}");

    let v = stdout_json(&r2cs(&["sublines", "--p", "5", "--n", "2", "--force"]));
    assert_eq!(v["counts"]["subline_count"], 0);
}

#[test]
fn eta_override_is_validated() {
    // a^2 is a square in F_81 and -1 is a square there, so -a^2 is too:
    // key 3 (= a^2) must be rejected, the canonical key 2 (= a) accepted.
    let bad = r2cs(&["sublines", "--p", "3", "--n", "4", "--eta", "3"]);
    assert_eq!(bad.status.code(), Some(2));
    let v = stdout_json(&r2cs(&["sublines", "--p", "3", "--n", "4", "--eta", "2"]));
    assert_eq!(v["counts"]["subline_count"], 120);
}

fn cache_file(dir: &Path) -> std::path::PathBuf {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(files.len(), 1, "one checkpoint file expected");
    files.pop().unwrap()
}

#[test]
fn warm_cache_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = |out: &Path| {
        vec![
            "sublines".to_string(),
            "--p".into(),
            "3".into(),
            "--n".into(),
            "4".into(),
            "--cache-dir".into(),
            cache.display().to_string(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let run = |out: &Path| {
        let args = args(out);
        let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        assert!(r2cs(&refs).status.success());
    };
    run(&a);
    run(&b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    // A killed scan leaves a partial tail; resuming reproduces the same
    // report bytes.
    let f = cache_file(&cache);
    let full = fs::read_to_string(&f).unwrap();
    let keep: String = full.lines().take(4).map(|l| format!("{l}\n")).collect();
    fs::write(&f, format!("{keep}{{\"kind\":\"blo")).unwrap();
    let c = dir.path().join("c.json");
    run(&c);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    // A corrupted header is detected, not silently rebuilt.
    let tampered = full.replacen("\"stage\":\"sublines\"", "\"stage\":\"sublimes\"", 1);
    fs::write(&f, tampered).unwrap();
    let args = args(&c);
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let out = r2cs(&refs);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("header"), "stderr: {err}");
}

#[test]
fn replay_verifies_and_names_failures() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    assert!(r2cs(&[
        "sublines",
        "--p",
        "3",
        "--n",
        "3",
        "--out",
        report.to_str().unwrap()
    ])
    .status
    .success());

    let ok = r2cs(&["replay", report.to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("report verified"));

    // Swap one mu for the subfield unit: the pair fails and is named.
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    v["witnesses"]["pairs"][0][1] = serde_json::json!(1);
    fs::write(&report, serde_json::to_string(&v).unwrap()).unwrap();
    let bad = r2cs(&["replay", report.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(
        err.contains("fails the internality condition"),
        "stderr: {err}"
    );

    // A report whose field does not rebuild is a header-level error.
    v["witnesses"]["pairs"][0][1] = serde_json::json!(2);
    v["field"]["modulus"] = serde_json::json!([1, 0, 0, 1]);
    fs::write(&report, serde_json::to_string(&v).unwrap()).unwrap();
    let broken = r2cs(&["replay", report.to_str().unwrap()]);
    assert_eq!(broken.status.code(), Some(3));
    let err = String::from_utf8_lossy(&broken.stderr);
    assert!(err.contains("does not rebuild"), "stderr: {err}");
}

#[test]
fn verify_reports_all_checks() {
    let v = stdout_json(&r2cs(&[
        "verify",
        "--family",
        "dickson",
        "--trials",
        "10000",
    ]));
    assert_eq!(v["counts"]["checks_passed"], v["counts"]["checks_total"]);
    let checks = v["witnesses"]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["pass"].as_bool().unwrap()));
    assert!(checks
        .iter()
        .any(|c| c["name"] == "kernel_no_zero_divisors"));

    let csv = r2cs(&[
        "verify",
        "--family",
        "cohen-ganley",
        "--n",
        "3",
        "--trials",
        "1000",
        "--format",
        "csv",
    ]);
    let s = String::from_utf8(csv.stdout).unwrap();
    assert!(s.starts_with("family,check,pass\n"), "csv: {s}");
    assert!(s.contains("cohen-ganley,flock_pair_check,true"), "csv: {s}");
}

#[test]
fn verify_replay_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("v.json");
    assert!(r2cs(&[
        "verify",
        "--family",
        "dickson",
        "--p",
        "5",
        "--trials",
        "1000",
        "--out",
        report.to_str().unwrap()
    ])
    .status
    .success());
    let ok = r2cs(&["replay", report.to_str().unwrap()]);
    assert!(
        ok.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&ok.stderr)
    );

    // Flip a recorded verdict: replay recomputes and disagrees.
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    v["witnesses"]["checks"][0]["pass"] = serde_json::json!(false);
    fs::write(&report, serde_json::to_string(&v).unwrap()).unwrap();
    let bad = r2cs(&["replay", report.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
}
