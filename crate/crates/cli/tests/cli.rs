use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcmodel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn rank_counts() {
    let v = json(&["rank", "--n", "4", "--p", "1/2"]);
    assert_eq!((v["rank"].as_u64(), v["nullity"].as_u64()), (Some(8), Some(7)));
    let v = json(&["rank", "--n", "4", "--p", "1/3"]);
    assert_eq!((v["rank"].as_u64(), v["nullity"].as_u64()), (Some(12), Some(3)));
    let v = json(&["rank", "--n", "4", "--p", "1/3", "--invariant"]);
    assert_eq!((v["rank"].as_u64(), v["nullity"].as_u64()), (Some(4), Some(1)));
    let v = json(&["rank", "--n", "4", "--p", "1/2", "--invariant"]);
    assert_eq!((v["rank"].as_u64(), v["nullity"].as_u64()), (Some(3), Some(2)));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(run(&["rank", "--n", "4", "--p", "2"]).status.code(), Some(2));
    assert_eq!(run(&["rank", "--n", "4", "--p", "x"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--n-max", "9"]).status.code(), Some(2));
    assert_eq!(run(&["operator", "--kind", "d", "--n", "3", "--p", "1/2"]).status.code(), Some(2));
}

#[test]
fn solve_product_measure_is_unique_on_singletons() {
    // i.i.d. Bernoulli(1/3) on three sites
    let mut entries = Vec::new();
    for bits in 0..8u32 {
        let ones = bits.count_ones() as i32;
        let num = 2i64.pow(3 - ones as u32);
        entries.push(format!("\"{bits:03b}\": \"{num}/27\""));
    }
    let path = temp_file("product.json", &format!("{{{}}}", entries.join(",")));
    let v = json(&["solve", "--p", "1/3", "--input", path.to_str().unwrap()]);
    assert_eq!(v["in_range"], true);
    assert_eq!(v["unique_nonnegative"], true);
    let parts: Vec<&str> = v["partitions"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    let q = v["nonnegative"].as_array().unwrap();
    for (label, value) in parts.iter().zip(q) {
        let expected = if *label == "012" { "1/1" } else { "0/1" };
        assert_eq!(value.as_str(), Some(expected), "partition {label}");
    }
}

#[test]
fn solve_symmetric_and_asymmetric_at_half() {
    let path = temp_file("sym.json", r#"{"00":"1/2","11":"1/2","01":"0","10":"0"}"#);
    let v = json(&["solve", "--p", "1/2", "--input", path.to_str().unwrap()]);
    assert!(v.get("half_solution").is_some());
    assert_eq!(v["in_range"], true);

    let path = temp_file("asym.json", r#"{"00":"1/4","11":"1/4","01":"1/2","10":"0"}"#);
    let v = json(&["solve", "--p", "1/2", "--input", path.to_str().unwrap()]);
    assert_eq!(v["in_range"], false);
    assert!(v["nonnegative"].is_null());
}

#[test]
fn verify_passes_small() {
    let v = json(&["verify", "--n-max", "4"]);
    let checks = v.as_array().or_else(|| v["checks"].as_array()).expect("check list");
    assert!(checks.iter().all(|c| c["passed"] == true));
    let names: Vec<String> = checks.iter().map(|c| c["name"].as_str().unwrap().to_string()).collect();
    assert!(names.iter().any(|n| n.contains("parity")));
    assert!(names.iter().any(|n| n.contains("phi")));
    let out = run(&["verify", "--n-max", "3", "--format", "csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("check,passed,detail\n"));
}

#[test]
fn ising_gap_and_convergence() {
    let out = run(&["ising", "--J", "0.5,1,2", "--h", "1e-3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let gap = header.iter().position(|h| *h == "gap").unwrap();
    let dist = header.iter().position(|h| h.starts_with("distance_h=")).unwrap();
    let mut count = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert!(fields[gap].parse::<f64>().unwrap() > 0.0);
        assert!(fields[dist].parse::<f64>().unwrap() < 1e-6);
        count += 1;
    }
    assert_eq!(count, 3);

    let out = run(&["ising", "--J", "0", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let gap = header.iter().position(|h| *h == "gap").unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[gap].parse::<f64>().unwrap(), 0.0);
    assert!(!row[gap].starts_with('-'));
}

#[test]
fn outputs_are_deterministic() {
    let sample = ["sample", "--n", "3", "--p", "1/3", "--q", "1/5,1/5,1/5,1/5,1/5", "--trials", "20000", "--seed", "7"];
    assert_eq!(run(&sample).stdout, run(&sample).stdout);
    let ising = ["ising", "--format", "csv"];
    assert_eq!(run(&ising).stdout, run(&ising).stdout);
    let v = json(&sample);
    assert!(v["total_variation"].as_f64().unwrap() < 0.05);
}

#[test]
fn remaining_commands_run() {
    json(&["kernel", "--n", "3", "--p", "1/2"]);
    json(&["small-p", "--family", "single-block-mixture", "--param", "n=3"]);
    json(&["limit-half", "--family", "ising-triangle", "--param", "J=1"]);
    json(&["invariant", "--p", "1/3", "--levels", "8/27,12/27,6/27,1/27"]);
    json(&["operator", "--kind", "color", "--n", "3", "--p", "1/3"]);
    let out = run(&["operator", "--kind", "c", "--n", "3", "--format", "csv"]);
    assert!(out.status.success());
}
