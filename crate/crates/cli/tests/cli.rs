use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn towerfact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_towerfact"))
        .args(args)
        .env_remove("TOWER_BITS_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = towerfact(&all);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_elapsed(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("elapsed_ms");
    v
}

#[test]
fn factor_tower_height() {
    assert_eq!(stdout(&towerfact(&["tower", "2715939072"])).trim(), "2^(2^3) * 3^(3^2) * 7^2 * 11");
    assert_eq!(stdout(&towerfact(&["height", "65536"])).trim(), "4");
    assert_eq!(stdout(&towerfact(&["factor", "1"])).trim(), "1");
    assert_eq!(stdout(&towerfact(&["factor", "2_715_939_072"])).trim(), "2^8 * 3^9 * 7^2 * 11");
    assert_eq!(stdout(&towerfact(&["lambda", "--k", "1", "12"])).trim(), "0");
    assert_eq!(stdout(&towerfact(&["lambda", "--k", "2", "12"])).trim(), "1");
}

#[test]
fn envelope_shape() {
    let v = json(&["factor", "360"]);
    assert_eq!(v["command"], "factor");
    assert_eq!(v["parameters"]["n"], 360);
    assert_eq!(v["result"]["factorization"], "2^3 * 3^2 * 5");
    assert_eq!(v["result"]["factors"], serde_json::json!([[2, 3], [3, 2], [5, 1]]));
    assert!(v["certified_error"].is_null());
    assert!(v["elapsed_ms"].is_u64());
    assert_eq!(json(&["tower", "65536"])["result"]["height"], 4);
}

#[test]
fn bad_input_exits_one() {
    for args in
        [&["factor", "0"][..], &["factor", "abc"], &["factor", "18446744073709551616"], &["height", "_5"], &["nope"]]
    {
        let out = towerfact(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(towerfact(&["height", "12", "--csv"]).status.code(), Some(1));
    assert_eq!(towerfact(&["--help"]).status.code(), Some(0));
}

#[test]
fn census_outputs() {
    let text = stdout(&towerfact(&["census", "--max", "1000000"]));
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["3", "44069", "44077"]), "{text}");

    let csv = stdout(&towerfact(&["census", "--max", "10", "--csv"]));
    assert_eq!(csv, "x,k,count,t_k\n10,0,1,10\n10,1,6,9\n10,2,3,3\n");

    let v = json(&["census", "--max", "100000", "--k", "4"]);
    assert_eq!(v["result"]["rows"], serde_json::json!([{ "k": 4, "count": 1, "t_k": 1 }]));

    let quiet = stdout(&towerfact(&["census", "--max", "10", "--k", "3", "--quiet"]));
    assert_eq!(quiet.split_whitespace().collect::<Vec<_>>(), ["3", "0", "0"]);
}

#[test]
fn json_is_deterministic_across_threads() {
    let a = without_elapsed(json(&["census", "--max", "200000", "--threads", "1", "--segment", "4096"]));
    let b = without_elapsed(json(&["census", "--max", "200000", "--threads", "2", "--segment", "4096"]));
    assert_eq!(a, b);
}

#[test]
fn densities() {
    let v = json(&["density", "--k", "1", "--precision", "1e-12"]);
    let pi = std::f64::consts::PI;
    let estimate = v["result"]["estimate"].as_f64().unwrap();
    let bound = v["certified_error"].as_f64().unwrap();
    assert!(bound <= 1e-12);
    assert!((estimate - 6.0 / (pi * pi)).abs() <= bound + 2e-16);
    assert_eq!(v["result"]["provenance"]["prime_cutoff"], 100_000);

    let text = stdout(&towerfact(&["density", "--k", "2", "--precision", "1e-9", "--quiet"]));
    assert!(text.starts_with("c_2 = 0.9559230159 ± "), "{text}");
    let text = stdout(&towerfact(&["density", "--k", "3", "--exact"]));
    assert!(text.starts_with("d_3 = 0.0440693392"), "{text}");

    let v = json(&["average", "--precision", "1e-4"]);
    let estimate = v["result"]["estimate"].as_f64().unwrap();
    assert!((estimate - 1.436_157_527_170_8).abs() < 1e-12);
    assert_eq!(v["result"]["provenance"]["tail"], "lemma");
}

#[test]
fn unreachable_precision_exits_three() {
    let out = towerfact(&["density", "--k", "2", "--precision", "1e-20"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
    assert_eq!(towerfact(&["density", "--k", "0"]).status.code(), Some(1));
}

#[test]
fn run_search_and_verify() {
    assert_eq!(
        stdout(&towerfact(&["run", "search", "--length", "3", "--height", "3", "--limit", "1000000"])).trim(),
        "248750"
    );
    let out = towerfact(&["run", "search", "--length", "3", "--height", "3", "--limit", "248751"]);
    assert_eq!(out.status.code(), Some(2));

    let v = json(&["run", "verify", "--n", "248_750", "--length", "3", "--height", "3"]);
    assert_eq!(v["result"]["status"], "verified");
    let primes: Vec<u64> = v["result"]["certificate"]["evidence"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["prime"].as_u64().unwrap())
        .collect();
    assert_eq!(primes, [5, 3, 2]);

    // a refutation is a successful command
    let v = json(&["run", "verify", "--n", "2", "--length", "1", "--height", "2"]);
    assert_eq!(v["result"]["status"], "unverified");
    assert_eq!(v["result"]["index"], 0);
}

#[test]
fn constructed_certificates_round_trip() {
    let v = json(&["run", "construct", "--length", "2", "--height", "2"]);
    let cert = &v["result"]["certificate"];
    assert_eq!(cert["n0"], "116");
    assert_eq!(cert["modulus"], "216");

    let mut child = Command::new(env!("CARGO_BIN_EXE_towerfact"))
        .args(["run", "verify", "--certificate", "-", "--json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(cert.to_string().as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let checked: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(checked["result"]["status"], "verified");
    assert_eq!(&checked["result"]["certificate"], cert);

    let mut forged = cert.clone();
    forged["n0"] = "117".into();
    let path = std::env::temp_dir().join(format!("towerfact-forged-{}.json", std::process::id()));
    std::fs::write(&path, forged.to_string()).unwrap();
    let v = json(&["run", "verify", "--certificate", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(v["result"]["status"], "invalid");
}

#[test]
fn construct_occurrences_and_budget() {
    let r0 = json(&["run", "construct", "--length", "3", "--height", "3"]);
    let r2 = json(&["run", "construct", "--length", "3", "--height", "3", "--occurrence", "2"]);
    let n0: u128 = r0["result"]["certificate"]["n0"].as_str().unwrap().parse().unwrap();
    let n2: u128 = r2["result"]["certificate"]["n0"].as_str().unwrap().parse().unwrap();
    let q: u128 = r0["result"]["certificate"]["modulus"].as_str().unwrap().parse().unwrap();
    assert_eq!(n2, n0 + 2 * q);

    let out = Command::new(env!("CARGO_BIN_EXE_towerfact"))
        .args(["run", "construct", "--length", "2", "--height", "4"])
        .env("TOWER_BITS_BUDGET", "40")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(towerfact(&["run", "construct", "--length", "1", "--height", "6"]).status.code(), Some(3));
    assert!(towerfact(&["run", "construct", "--length", "2", "--height", "4"]).status.success());
}
