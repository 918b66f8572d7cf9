use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn base() -> Value {
    json!({
        "mesh": {"extent": [1.0], "cells": [16]},
        "time": {"t_final": 1.0, "steps": 4},
        "model": {"name": "p_laplace", "p": 3.0, "lambda": 1.0},
        "source": {"name": "manufactured_cos"},
        "decomposition": {"q": 2, "overlap_fraction": 0.25},
        "scheme": {"kind": "PR", "s": 2.0, "max_sweeps": 12, "stop_tol": 0.0},
        "output": {"csv_path": "trace.csv", "json_summary_path": "summary.json"},
        "rng_seed": 5
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn stdd(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stdd"))
        .args(args)
        .arg(config)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pr.json", &base());
    let out = stdd(&["run"], &cfg);
    assert!(out.status.success(), "{}", stderr(&out));

    let (header, rows) = csv_rows(&dir.path().join("trace.csv"));
    assert_eq!(
        header,
        ["sweep", "err_H", "err_k_total", "err_k_1", "err_k_2", "pr_v_norm", "pr_w_norm", "wall_ms"]
    );
    assert_eq!(rows.len(), 12);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
        for cell in &row[1..7] {
            assert!(cell.parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(row[7], "");
    }

    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["sweeps"], 12);
    assert_eq!(summary["s_used"], 2.0);
    assert_eq!(summary["monotone_violations"], 0);
    let last: f64 = rows[11][1].parse().unwrap();
    assert_eq!(summary["final_err_H"].as_f64().unwrap(), last);
}

#[test]
fn zero_source_reaches_zero_after_one_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["source"] = json!({"name": "zero"});
    cfg["scheme"] = json!({"kind": "AS", "max_sweeps": 3, "stop_tol": 0.0});
    let path = write_config(dir.path(), "zero.json", &cfg);
    let out = stdd(&["run"], &path);
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, rows) = csv_rows(&dir.path().join("trace.csv"));
    assert!(rows[0][1].parse::<f64>().unwrap() <= 1e-12);
    // additive runs leave the two-domain columns empty
    assert_eq!(rows[0][5], "");
    assert_eq!(rows[0][6], "");
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["decomposition"] = json!({"q": 3, "overlap_fraction": 0.2});
    cfg["scheme"] = json!({
        "kind": "AS", "max_sweeps": 6, "stop_tol": 0.0,
        "initial_guess": {"kind": "random", "amplitude": 1.0}
    });
    let path = write_config(dir.path(), "as.json", &cfg);
    let read = || std::fs::read(dir.path().join("trace.csv")).unwrap();

    assert!(stdd(&["run", "--seed", "9"], &path).status.success());
    let a = read();
    assert!(stdd(&["run", "--seed", "9", "--threads", "3"], &path).status.success());
    assert_eq!(a, read());
    assert!(stdd(&["run", "--seed", "10"], &path).status.success());
    assert_ne!(a, read());
}

#[test]
fn missing_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg.as_object_mut().unwrap().remove("mesh");
    let out = stdd(&["run"], &write_config(dir.path(), "bad.json", &cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mesh"), "{}", stderr(&out));
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("decomposition", json!({"q": 2, "overlap_fraction": 0.25, "c_min": 0.0})),
        ("scheme", json!({"kind": "XX", "s": 1.0, "max_sweeps": 3})),
        ("scheme", json!({"kind": "PR", "max_sweeps": 3})),
        ("decomposition", json!({"q": 3, "overlap_fraction": 0.2})),
        ("model", json!({"name": "p_laplace", "p": 1.0})),
        ("mesh", json!({"extent": [1.0], "cells": [16], "depth": 2})),
    ];
    for (i, (key, value)) in cases.into_iter().enumerate() {
        let mut cfg = base();
        cfg[key] = value;
        let out = stdd(&["run"], &write_config(dir.path(), &format!("c{i}.json"), &cfg));
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", stderr(&out));
    }
    let out = stdd(&["run", "--threads", "0"], &write_config(dir.path(), "ok.json", &base()));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base();
    cfg["output"]["csv_path"] = json!(dir.path().join("no/such/dir/trace.csv"));
    let out = stdd(&["run"], &write_config(dir.path(), "io.json", &cfg));
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let missing = dir.path().join("absent.json");
    assert_eq!(stdd(&["run"], &missing).status.code(), Some(4));
}

#[test]
fn verify_passes_for_p_laplace_and_fails_for_anti_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let good = stdd(&["verify"], &write_config(dir.path(), "good.json", &base()));
    assert_eq!(good.status.code(), Some(0), "{}", stderr(&good));
    let text = String::from_utf8(good.stdout).unwrap();
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("ok")), "{text}");

    let mut cfg = base();
    cfg["model"] = json!({"name": "anti_monotone"});
    let bad = stdd(&["verify"], &write_config(dir.path(), "bad.json", &cfg));
    assert_eq!(bad.status.code(), Some(1), "{}", stderr(&bad));
    assert!(String::from_utf8(bad.stdout).unwrap().contains("FAIL"));
}
