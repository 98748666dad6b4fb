use std::process::{Command, Output};

use serde_json::Value;

fn mallows(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mallows"))
        .args(args)
        .env_remove("MALLOWS_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn oracle_reports_the_partition_function() {
    let out = mallows(&["oracle", "--n", "3", "--beta", "1"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["schema"], "mallows-report/1");
    assert_eq!(report["kind"], "oracle");
    assert_eq!(report["pass"], true);
    let q = (-2.0f64).exp();
    let z = report["results"]["z"].as_f64().unwrap();
    assert!((z - (1.0 + 2.0 * q + 3.0 * q * q)).abs() < 1e-12);
    assert_eq!(
        report["results"]["expectations"].as_array().unwrap().len(),
        3
    );
    assert_eq!(
        report["results"]["tails"][0]["tail"]
            .as_array()
            .unwrap()
            .len(),
        5
    );
}

#[test]
fn oracle_refuses_large_n_with_a_hint() {
    let out = mallows(&["oracle", "--n", "11", "--beta", "1"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n <= 10") && err.contains("sample"), "{err}");
}

#[test]
fn nonpositive_beta_is_a_usage_error() {
    for beta in ["-1", "0", "nan"] {
        let out = mallows(&["oracle", "--n", "3", "--beta", beta]);
        assert_eq!(out.status.code(), Some(2), "beta {beta}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
    }
}

#[test]
fn malformed_grid_and_unknown_flags_are_rejected() {
    let out = mallows(&["verify-thm131", "--beta-grid", "1.5,x", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mallows(&["verify-thm131", "--beta-grid", "1.5,-2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mallows(&["sample", "--n", "3", "--beta", "1", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_of_one_point_is_always_the_identity() {
    let out = mallows(&[
        "sample",
        "--n",
        "1",
        "--beta",
        "0.5",
        "--samples",
        "5",
        "--emit",
        "perms",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| l == "1"));
}

#[test]
fn sample_stats_csv() {
    let args = [
        "sample",
        "--n",
        "12",
        "--beta",
        "0.4",
        "--samples",
        "7",
        "--chains",
        "2",
        "--burnin",
        "3",
        "--thin",
        "2",
        "--seed",
        "9",
    ];
    let out = mallows(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("chain,step,cycle_len_s,diameter_s,l1,largest_cycle")
    );
    let rows: Vec<Vec<u64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows.iter().filter(|r| r[0] == 0).count(), 4);
    assert_eq!(rows[0][1], 5);
    for r in &rows {
        assert!(r[2] >= 1 && r[3] < 12 && r[4] % 2 == 0 && r[5] >= r[2]);
    }
    assert_eq!(stdout(&mallows(&args)), text);
}

#[test]
fn sample_writes_to_a_file() {
    let dir = std::env::temp_dir().join(format!("mallows-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("perms.txt");
    let out = mallows(&[
        "sample",
        "--n",
        "5",
        "--beta",
        "1",
        "--samples",
        "4",
        "--emit",
        "perms",
        "--seed",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    for line in text.lines() {
        let mut v: Vec<usize> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        v.sort_unstable();
        assert_eq!(v, vec![1, 2, 3, 4, 5]);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let out = mallows(&["sample", "--n", "3", "--beta", "1", "--samples", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("seed: "));
}

#[test]
fn arcs_trace_is_an_event_array() {
    let out = mallows(&[
        "arcs", "--n", "9", "--beta", "0.2", "--warmup", "4", "--seed", "7", "--trace",
    ]);
    assert!(out.status.success());
    let events = json(&out);
    let events = events.as_array().unwrap();
    assert_eq!(events.len(), 9);
    for (e, step) in events.iter().zip((1..=9).rev()) {
        assert_eq!(e["step"], step);
        let kind = e["kind"].as_str().unwrap();
        assert!(kind == "merge" || kind == "close");
        assert!(e["head"].is_u64() && e["tail"].is_u64() && e["arc_ids"].is_array());
    }
}

#[test]
fn arcs_report_checks_a_given_start() {
    let out = mallows(&[
        "arcs", "--n", "4", "--beta", "1", "--start", "4 3 2 1", "--seed", "1",
    ]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["pass"], true);
    assert_eq!(report["results"]["start"], "4 3 2 1");
    let out = mallows(&[
        "arcs", "--n", "5", "--beta", "1", "--start", "4 3 2 1", "--seed", "1",
    ]);
    assert!(!out.status.success());
}

#[test]
fn reports_are_deterministic_given_the_seed() {
    let args = [
        "verify-thm131",
        "--n",
        "20",
        "--beta-grid",
        "0.5,1",
        "--samples",
        "2000",
        "--chains",
        "2",
        "--seed",
        "5",
    ];
    let a = mallows(&args);
    let b = mallows(&args);
    assert_eq!(without_timing(json(&a)), without_timing(json(&b)));
    assert_eq!(json(&a)["seed"], 5);
    // the verdict and the exit status agree
    assert_eq!(json(&a)["pass"].as_bool().unwrap(), a.status.success());
}

#[test]
fn failing_criteria_give_a_nonzero_exit() {
    // far from the small-β regime, so the uniform-limit checks fail
    let out = mallows(&[
        "verify-thm12",
        "--n",
        "50",
        "--beta",
        "5",
        "--samples",
        "200",
        "--reference-draws",
        "200",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(report["pass"], false);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[FAIL]"));
}

#[test]
fn saturation_sweep_passes_at_small_sizes() {
    let out = mallows(&[
        "verify-thm11",
        "--n-grid",
        "50,100",
        "--samples",
        "2000",
        "--chains",
        "2",
        "--seed",
        "4",
    ]);
    let report = json(&out);
    assert!(report["results"].get("exponent").is_none());
    assert_eq!(report["criteria"].as_array().unwrap().len(), 3);
    assert!(out.status.success(), "{report:#}");
}

#[test]
fn invariants_csv() {
    let out = mallows(&[
        "invariants",
        "--n-grid",
        "8,30",
        "--replays",
        "50",
        "--format",
        "csv",
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("criterion,observed,expected,tolerance,pass\n"));
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn thread_cap_must_be_positive() {
    let out = Command::new(env!("CARGO_BIN_EXE_mallows"))
        .args(["sample", "--n", "3", "--beta", "1", "--seed", "1"])
        .env("MALLOWS_THREADS", "0")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_mallows"))
        .args([
            "sample",
            "--n",
            "3",
            "--beta",
            "1",
            "--seed",
            "1",
            "--samples",
            "4",
        ])
        .env("MALLOWS_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}
