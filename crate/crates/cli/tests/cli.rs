use std::process::{Command, Output};

use serde_json::Value;

fn mixmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixmap")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn build_table_first_row() {
    let out = mixmap(&["build", "--lambda", "14", "--r", "1", "--n-max", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[1].parse::<f64>().unwrap(), 2.0);
    assert_eq!(row[2].parse::<f64>().unwrap(), 2.5);
    assert_eq!(row[3], "13");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn lap_count_ignores_r() {
    let a = json_of(&mixmap(&["build", "--r", "1", "--n-max", "1", "--format", "json"]));
    let b = json_of(&mixmap(&["build", "--r", "2", "--n-max", "1", "--format", "json"]));
    assert_eq!(a["levels"][0]["M"], "13");
    assert_eq!(a["levels"][0]["M"], b["levels"][0]["M"]);
    assert_ne!(a["levels"][0]["k"], b["levels"][0]["k"]);
}

#[test]
fn small_lambda_is_a_config_error() {
    let out = mixmap(&["build", "--lambda", "10", "--r", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("14"));
    assert_eq!(mixmap(&["entropy", "--method", "spectral", "--format", "dot"]).status.code(), Some(2));
    assert_eq!(mixmap(&["verify", "--n", "5..2"]).status.code(), Some(2));
}

#[test]
fn build_writes_a_loadable_map() {
    let dir = std::env::temp_dir().join(format!("mixmap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("map.json");
    let out = mixmap(&["build", "--n-max", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let m = mixmap::PiecewiseMap::<f64>::from_json(&text).unwrap();
    assert_eq!(m.eval(0.0).unwrap(), 0.0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn h1_dot_has_fourteen_nodes() {
    let out = mixmap(&["graph", "--subgraph", "H", "--n", "1", "--format", "dot"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph"));
    let nodes = text.lines().filter(|l| l.contains("[label=")).count();
    assert_eq!(nodes, 14);
    // 13 laps into the scaled copy, which fans back out to all 13
    let edges = text.lines().filter(|l| l.contains("->")).count();
    assert_eq!(edges, 26);
}

#[test]
fn graph_json_counts() {
    let doc = json_of(&mixmap(&["graph", "--N", "1", "--format", "json"]));
    assert_eq!(doc["kind"], "truncation");
    let ext = json_of(&mixmap(&["graph", "--N", "2", "--extension"]));
    let base = json_of(&mixmap(&["graph", "--N", "2"]));
    let n = |d: &Value| d["vertices"].as_array().unwrap().len();
    assert_eq!(n(&ext), n(&base) + 2);
}

#[test]
fn separated_local_value() {
    let doc = json_of(&mixmap(&["entropy", "--method", "separated-local", "--n", "2", "--p", "2"]));
    let v = doc["value_nats"].as_f64().unwrap();
    assert!((v - 24f64.ln() / 3.0).abs() < 1e-12, "{v}");
    assert_eq!(doc["details"]["cardinality"], 576);
    assert_eq!(doc["details"]["pairwise_separated"], true);
    assert_eq!(doc["details"]["in_bowen_ball"], true);
}

#[test]
fn entropy_bits_and_csv() {
    let nats = json_of(&mixmap(&["entropy", "--n", "1"]));
    let bits = json_of(&mixmap(&["entropy", "--n", "1", "--bits"]));
    let ln13_2 = 13f64.ln() / 2.0;
    assert!((nats["value_nats"].as_f64().unwrap() - ln13_2).abs() < 1e-12);
    assert!((bits["value_bits"].as_f64().unwrap() - ln13_2 / 2f64.ln()).abs() < 1e-12);
    let out = mixmap(&["entropy", "--method", "loop-count", "--N", "2", "--format", "csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().lines().count() > 2);
}

#[test]
fn measure_mass_near_zero() {
    let out = mixmap(&["measure", "--n", "5", "--bins", "100"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cut = (1.0 + 1.0 / 5.0 + 1.0 / 50.0) / 14.0;
    let mut mass = 0.0;
    let mut total = 0.0;
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        total += f[2];
        if f[0] < cut {
            mass += f[2];
        }
    }
    assert!((total - 1.0).abs() < 1e-12);
    assert!(mass >= 5.0 / 6.0 - 1e-12, "{mass}");
}

#[test]
fn verify_suites_pass() {
    for args in [
        &["verify", "--suite", "markov", "--N", "6"][..],
        &["verify", "--suite", "mixing", "--trials", "100", "--seed", "7"],
        &["verify", "--suite", "entropy-chain", "--n", "1..8"],
    ] {
        let doc = json_of(&mixmap(args));
        assert_eq!(doc["passes"], true, "{args:?}");
    }
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        &["verify", "--suite", "mixing", "--trials", "20", "--seed", "3"][..],
        &["verify", "--suite", "coding", "--trials", "10", "--seed", "3"],
        &["graph", "--N", "2", "--format", "dot"],
        &["entropy", "--method", "separated-local", "--n", "1", "--p", "2"],
        &["measure", "--n", "3", "--format", "json"],
    ] {
        let a = mixmap(args);
        let b = mixmap(args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
