use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_replimarket");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("REPLIMARKET_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn synth(dir: &Path, seed: u64, markets: usize) {
    ok(&["synth", "--seed", &seed.to_string(), "--markets", &markets.to_string(), "--out", dir.to_str().unwrap()]);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    synth(&a, 7, 5);
    synth(&b, 7, 5);
    synth(&c, 8, 5);
    let fa = files(&a);
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, files(&b));
    assert_ne!(fa, files(&c));
}

#[test]
fn report_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 11, 16);
    let (o1, o2) = (tmp.path().join("o1"), tmp.path().join("o2"));
    for o in [&o1, &o2] {
        ok(&["report", "--data-dir", data.to_str().unwrap(), "--out", o.to_str().unwrap()]);
    }
    let f1 = files(&o1);
    let names: Vec<&str> = f1.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "aggregates.csv",
        "scores.csv",
        "table1.csv",
        "table2.csv",
        "curve_trades.csv",
        "curve_hours.csv",
        "discrepancies.csv",
        "market_vs_survey.csv",
        "report.json",
    ] {
        assert!(names.contains(&expected), "missing {expected}: {names:?}");
    }
    assert_eq!(f1, files(&o2));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(o1.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["counts"]["findings"], 16);
}

#[test]
fn every_subcommand_runs_on_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 3, 12);
    let out = tmp.path().join("out");
    let (d, o) = (data.to_str().unwrap(), out.to_str().unwrap());
    for sub in ["validate", "replay", "aggregate", "evaluate", "dynamics", "pvalue"] {
        ok(&[sub, "--data-dir", d, "--out", o]);
    }
    ok(&["replay", "--data-dir", d, "--out", o, "--mode", "simulated", "--liquidity", "100"]);
    ok(&["aggregate", "--data-dir", d, "--out", o, "--method", "mean,voting", "--threshold", "0.6"]);
    let agg = fs::read_to_string(out.join("aggregates.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2 * 12);
    ok(&["dynamics", "--data-dir", d, "--out", o, "--loess-span", "0.5", "--loess-degree", "1"]);
    ok(&["evaluate", "--data-dir", d, "--out", o, "--yates"]);
    let table2 = fs::read_to_string(out.join("table2.csv")).unwrap();
    assert!(table2.starts_with("term,estimate,std_error,t,p_value\nintercept,"));
}

#[test]
fn explicit_paths_and_environment_directory_work() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 5, 6);
    let out = tmp.path().join("out");
    let p = |f: &str| data.join(f).to_str().unwrap().to_string();
    ok(&[
        "aggregate",
        "--outcomes",
        &p("outcomes.csv"),
        "--surveys",
        &p("surveys.csv"),
        "--trades",
        &p("trades.csv"),
        "--out",
        out.to_str().unwrap(),
    ]);
    let status = Command::new(BIN)
        .args(["pvalue", "--out", out.to_str().unwrap()])
        .env("REPLIMARKET_DATA_DIR", &data)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn failures_exit_nonzero_with_diagnostics() {
    let out = run(&["report", "--out", "/nonexistent/never"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = run(&["aggregate", "--data-dir", "/nonexistent/dir"]);
    assert!(!out.status.success());

    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 1, 3);
    let d = data.to_str().unwrap();
    let out = run(&["aggregate", "--data-dir", d, "--threshold", "1.5", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold"));

    let out = run(&["aggregate", "--data-dir", d, "--method", "bogus"]);
    assert!(!out.status.success());

    // a broken belief is reported and makes `validate` fail
    let surveys = data.join("surveys.csv");
    let text = fs::read_to_string(&surveys).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cols: Vec<&str> = lines[1].split(',').collect();
    lines[1] = format!("{},{},1.3", cols[0], cols[1]);
    fs::write(&surveys, lines.join("\n") + "\n").unwrap();
    let out = run(&["validate", "--data-dir", d, "--out", tmp.path().join("v").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("belief"));
}
