use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn frosette(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frosette"))
        .args(args)
        .env_remove("FROSETTE_SEED")
        .output()
        .expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const DEMO: &str = r#"{"n": 8, "m": 6, "k": 1, "altitude_km": 1500, "inclination_deg": 53, "min_elevation_deg": 25}"#;

#[test]
fn route_example_has_seven_hops() {
    let v = json_out(&frosette(&["route", "--from", "0.0", "--to", "4.5"]));
    assert_eq!(v["hops"], 7);
    assert_eq!(v["nodes"][0], "0.0");
    assert_eq!(v["nodes"][7], "4.5");
}

#[test]
fn route_with_permutation_and_disjoint() {
    let v = json_out(&frosette(&["route", "--from", "0.0", "--to", "4.5", "--perm", "1,0"]));
    assert_eq!(v["hops"], 7);
    assert_eq!(v["labels"][0]["layer"], 1);
    let v = json_out(&frosette(&["route", "--from", "0.0", "--to", "4.5", "--disjoint"]));
    assert_eq!(v["paths"].as_array().unwrap().len(), 4);
    let dir = tempfile::tempdir().unwrap();
    let ring = write(
        dir.path(),
        "k0.json",
        r#"{"n": 8, "m": 6, "k": 0, "altitude_km": 1500, "inclination_deg": 53, "min_elevation_deg": 25}"#,
    );
    let v = json_out(&frosette(&["route", "--from", "3", "--to", "7", "--literal", "--config", &ring]));
    assert_eq!(v["hops"], 4);
}

#[test]
fn size_examples() {
    let v = json_out(&frosette(&["size", "--rtt-ms", "8.41", "--elevation-deg", "25", "--base-n", "8"]));
    assert_eq!((v["k"].as_u64(), v["satellites"].as_u64()), (Some(1), Some(64)));
    // c·RTT/2 at 8.40 ms sits just under the 64-satellite altitude.
    let v = json_out(&frosette(&["size", "--rtt-ms", "8.40", "--elevation-deg", "25", "--base-n", "8"]));
    assert_eq!(v["n_min"], 65);
    let v = json_out(&frosette(&["size", "--rtt-ms", "79.1", "--elevation-deg", "25", "--base-n", "8"]));
    assert_eq!((v["k"].as_u64(), v["satellites"].as_u64()), (Some(0), Some(8)));
}

#[test]
fn generate_and_reuse_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", DEMO);
    let topo = dir.path().join("t.json");
    let tables = dir.path().join("a.bin");
    let v = json_out(&frosette(&[
        "generate", "--config", &cfg,
        "--out-topology", topo.to_str().unwrap(),
        "--out-tables", tables.to_str().unwrap(),
    ]));
    assert_eq!((v["nodes"].as_u64(), v["edges"].as_u64()), (Some(64), Some(128)));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&topo).unwrap()).unwrap();
    assert_eq!(doc["nodes"].as_array().unwrap().len(), 64);
    assert_eq!(doc["edges"].as_array().unwrap().len(), 128);
    assert_eq!(std::fs::metadata(&tables).unwrap().len(), v["table_bytes"].as_u64().unwrap());

    let fresh = json_out(&frosette(&["cells", "--config", &cfg, "--to-location", "1,0/5,3"]));
    let loaded = json_out(&frosette(&[
        "cells", "--config", &cfg, "--to-location", "1,0/5,3", "--tables", tables.to_str().unwrap(),
    ]));
    assert_eq!(fresh, loaded);
}

#[test]
fn cells_queries() {
    let v = json_out(&frosette(&["cells", "--count"]));
    assert_eq!(v["count"], 256);
    let v = json_out(&frosette(&["cells", "--locate", "-33.9", "18.4", "--level", "0"]));
    assert_eq!(v["level"], 0);
    let back = json_out(&frosette(&["cells", "--to-location", v["cell"].as_str().unwrap()]));
    assert_eq!(back["phantom"], false);
    // Exactly one query at a time.
    assert_eq!(frosette(&["cells", "--count", "--locate", "0", "0"]).status.code(), Some(1));
}

#[test]
fn fib_dump() {
    let v = json_out(&frosette(&["fib", "--sat", "0.0"]));
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    assert!(entries.len() as u64 <= v["bound"].as_u64().unwrap());
    let patterns: Vec<&str> = entries.iter().map(|e| e["match"].as_str().unwrap()).collect();
    assert_eq!(&patterns[..3], ["001", "01*", "1**"]);
}

#[test]
fn geo_route_json() {
    let v = json_out(&frosette(&[
        "route", "--geo", "--src-lat", "39.9", "--src-lon", "116.4",
        "--dst-lat", "40.7", "--dst-lon", "-74.0", "--time", "1000",
    ]));
    assert_eq!(v["delivered"], true);
    assert!(v["path"]["hops"].as_u64().unwrap() <= 8 + 16);
}

#[test]
fn exit_codes_and_error_documents() {
    let o = frosette(&["route", "--from", "0.9", "--to", "1.1"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "range");

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"n": 8, "m": 8, "k": 1, "altitude_km": 1500, "inclination_deg": 53, "min_elevation_deg": 25}"#);
    let o = frosette(&["fib", "--sat", "0.0", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");

    let unknown = write(dir.path(), "unknown.json", r#"{"n": 8, "m": 6, "k": 1, "altitude_km": 1500, "inclination_deg": 53, "min_elevation_deg": 25, "extra": 1}"#);
    assert_eq!(frosette(&["fib", "--sat", "0.0", "--config", &unknown]).status.code(), Some(2));

    assert_eq!(frosette(&["route", "--from", "0.0"]).status.code(), Some(1));
    assert_eq!(frosette(&["nonsense"]).status.code(), Some(1));
    assert_eq!(frosette(&[]).status.code(), Some(1));
    assert_eq!(frosette(&["--version"]).status.code(), Some(0));
    assert_eq!(frosette(&["size", "--rtt-ms", "0", "--elevation-deg", "25", "--base-n", "8"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_deterministic_trace() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"config": {"n": 8, "m": 6, "k": 1, "altitude_km": 1500, "inclination_deg": 53, "min_elevation_deg": 25},
            "end_s": 600, "step_s": 10,
            "endpoints": [{"name": "Beijing", "lat_deg": 39.9, "lon_deg": 116.4}, {"name": "New York", "lat_deg": 40.7, "lon_deg": -74.0}],
            "experiments": [{"src": "Beijing", "dst": "New York"}], "seed": 4}"#,
    );
    let run = |out: &Path, seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_frosette"));
        c.args(["simulate", "--scenario", &sc, "--out", out.to_str().unwrap()]);
        match seed {
            Some(s) => c.env("FROSETTE_SEED", s),
            None => c.env_remove("FROSETTE_SEED"),
        };
        json_out(&c.output().unwrap())
    };
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let sa = run(&a, None);
    run(&b, None);
    let sc_ = run(&c, Some("77"));
    assert_eq!(sa["seed"], 4);
    assert_eq!(sc_["seed"], 77);
    assert_eq!(sa["steps"], 60);
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    let mut lines = ta.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_s,experiment,src_sat,dst_sat,frosette_hops,frosette_delay_s,oracle_hops,oracle_delay_s,stretch,handoff,covered,seed"
    );
    assert_eq!(lines.count(), 60);

    let o = Command::new(env!("CARGO_BIN_EXE_frosette"))
        .args(["simulate", "--scenario", &sc])
        .env("FROSETTE_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let o = frosette(&["verify"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 12, "{text}");
    assert_eq!(o.status.code(), Some(0));
}
