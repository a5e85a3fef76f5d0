use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FOUR_TX_BLOCK: &str = r#"{"transactions":[
 {"id":"tx1","time":2,"keys":["k2","k3","k4","k5","k6","k7","k8"]},
 {"id":"tx2","time":4,"keys":["k2","k3"]},
 {"id":"tx3","time":5,"keys":["k4","k5","k6"]},
 {"id":"tx4","time":2,"keys":["k7","k8"]}]}"#;

const BANZHAF: &str = r#"{"transactions":[
 {"id":"tx1","time":1,"keys":["k1"]},
 {"id":"tx2","time":1,"keys":["k1"]},
 {"id":"tx3","time":1,"keys":["k2"]}]}"#;

fn pargas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pargas"))
        .args(args)
        .env_remove("PARGAS_INSTANCE_CAP")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gas_four_tx_block_current_and_esm() {
    let dir = TempDir::new().unwrap();
    let block = file(&dir, "b.json", FOUR_TX_BLOCK);
    let o = pargas(&["gas", s(&block), "--mech", "current", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["result"]["total"], "13");

    let o = pargas(&[
        "gas",
        s(&block),
        "--mech",
        "esm",
        "--threads",
        "3",
        "--format",
        "json",
    ]);
    let v = json(&o);
    assert_eq!(v["config"]["threads"], 3);
    for id in ["tx1", "tx2", "tx3", "tx4"] {
        assert_eq!(v["result"]["per_tx"][id], "7/4");
    }
}

#[test]
fn gas_banzhaf_fixture_text_shows_exact_and_approximate() {
    let dir = TempDir::new().unwrap();
    let block = file(&dir, "b.json", BANZHAF);
    let o = pargas(&["gas", s(&block), "--mech", "banzhaf"]);
    let text = stdout(&o);
    assert!(text.starts_with("# config: {"), "{text}");
    let row = |id: &str| {
        text.lines()
            .find(|l| l.starts_with(id))
            .unwrap()
            .to_string()
    };
    assert!(row("tx1").contains("3/4") && row("tx1").contains("≈0.7500"));
    assert!(row("tx3").contains("1/4"));
    assert!(row("total").contains("7/4"));
}

#[test]
fn weights_file_overrides_block_weights() {
    let dir = TempDir::new().unwrap();
    let block = file(&dir, "b.json", BANZHAF);
    let weights = file(
        &dir,
        "w.json",
        r#"{"weights":{"k1":"1/2"},"default_weight":3}"#,
    );
    let o = pargas(&[
        "gas",
        s(&block),
        "--mech",
        "wa",
        "--weights",
        s(&weights),
        "--format",
        "json",
    ]);
    let v = json(&o);
    assert_eq!(v["result"]["per_tx"]["tx1"], "3/2");
    assert_eq!(v["result"]["per_tx"]["tx3"], "4");
    assert!(v["config"]["weights"].as_str().unwrap().ends_with("w.json"));
}

#[test]
fn schedule_four_tx_block_json_text_and_svg() {
    let dir = TempDir::new().unwrap();
    let block = file(&dir, "b.json", FOUR_TX_BLOCK);
    let v = json(&pargas(&[
        "schedule",
        s(&block),
        "--threads",
        "3",
        "--format",
        "json",
    ]));
    assert_eq!(v["result"]["makespan"], "7");
    assert_eq!(v["result"]["schedule"]["starts"]["tx1"], "0");
    assert_eq!(v["result"]["valid"], true);
    let v = json(&pargas(&[
        "schedule",
        s(&block),
        "--threads",
        "2",
        "--format",
        "json",
    ]));
    assert_eq!(v["result"]["makespan"], "8");

    let svg = stdout(&pargas(&[
        "schedule",
        s(&block),
        "--threads",
        "3",
        "--format",
        "svg",
    ]));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<!-- config:"));
    // tx1 spans all seven keys and starts at the left edge.
    assert_eq!(svg.matches(r#"data-tx="tx1" x="80""#).count(), 7);
    assert_eq!(svg.matches(r#"data-tx="tx2" x="200""#).count(), 2);
}

#[test]
fn singleton_text_schedule_is_one_bar() {
    let dir = TempDir::new().unwrap();
    let block = file(
        &dir,
        "b.json",
        r#"{"transactions":[{"id":"only","time":3,"keys":["k"]}]}"#,
    );
    let text = stdout(&pargas(&["schedule", s(&block)]));
    assert!(text.contains("makespan: 3"));
    assert!(text.lines().any(|l| l == "k |aaa|"), "{text}");
}

#[test]
fn greedy_mode_is_valid() {
    let dir = TempDir::new().unwrap();
    let block = file(&dir, "b.json", FOUR_TX_BLOCK);
    let v = json(&pargas(&[
        "schedule",
        s(&block),
        "--mode",
        "greedy",
        "--format",
        "json",
    ]));
    assert_eq!(v["config"]["mode"], "greedy");
    assert_eq!(v["result"]["valid"], true);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = file(&dir, "bad.json", "{");
    assert_eq!(pargas(&["gas", s(&bad)]).status.code(), Some(2));
    assert_eq!(
        pargas(&["gas", "/nonexistent/block.json"]).status.code(),
        Some(2)
    );
    assert_eq!(pargas(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        pargas(&["gas", s(&bad), "--threads", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        pargas(&["gas", s(&bad), "--mech", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(pargas(&["check"]).status.code(), Some(2));
    let block = file(&dir, "b.json", FOUR_TX_BLOCK);
    assert_eq!(
        pargas(&["gas", s(&block), "--format", "svg"]).status.code(),
        Some(2)
    );
}

#[test]
fn instance_cap_env_override() {
    let dir = TempDir::new().unwrap();
    let block = file(&dir, "b.json", FOUR_TX_BLOCK);
    let run = |cap: &str| {
        Command::new(env!("CARGO_BIN_EXE_pargas"))
            .args(["gas", s(&block), "--mech", "shapley", "--format", "json"])
            .env("PARGAS_INSTANCE_CAP", cap)
            .output()
            .unwrap()
    };
    let o = run("3");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
    let o = run("4");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["config"]["instance_cap"], 4);
    assert_eq!(run("99").status.code(), Some(2));
}

#[test]
fn check_single_cells() {
    let o = pargas(&["check", "--mech", "shapley", "--prop", "efficiency"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS shapley/P7 efficiency: observed ✓, expected ✓"));

    let o = pargas(&["check", "--mech", "banzhaf", "--prop", "efficiency"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("observed ✗, expected ✗"));
    assert!(text.contains("confirmed by fixture F2"));
}

#[test]
fn witness_replay_round_trip() {
    let dir = TempDir::new().unwrap();
    let v = json(&pargas(&[
        "check", "--mech", "banzhaf", "--prop", "P7", "--budget", "200", "--format", "json",
    ]));
    let witness = v["result"]["cells"][0]["witness"].clone();
    assert!(witness.is_object());
    let good = file(&dir, "w.json", &witness.to_string());
    let o = pargas(&["check", "--witness", s(&good)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS banzhaf/P7"));

    let mut tampered = witness;
    tampered["expected"]["rhs"] = Value::String("12345".into());
    let bad = file(&dir, "t.json", &tampered.to_string());
    assert_eq!(
        pargas(&["check", "--witness", s(&bad)]).status.code(),
        Some(1)
    );
}

#[test]
fn output_is_deterministic_and_written_to_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim.csv");
    let a = pargas(&[
        "simulate",
        "--seed",
        "3",
        "--budget",
        "20",
        "--mech",
        "tpm",
        "--out",
        s(&out),
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert!(a.stdout.is_empty());
    let written = std::fs::read_to_string(&out).unwrap();
    let b = pargas(&["simulate", "--seed", "3", "--budget", "20", "--mech", "tpm"]);
    assert_eq!(written, stdout(&b));
    let lines: Vec<&str> = written.lines().collect();
    assert!(lines[0].starts_with("# config: "));
    assert_eq!(
        lines[1],
        "block_index,base_fee,gas_used,gas_limit,makespan,included_count"
    );
    assert_eq!(lines.len(), 22);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}

#[test]
fn simulate_workload_file() {
    let dir = TempDir::new().unwrap();
    let w = file(&dir, "w.json", r#"{"blocks":1,"bids_per_block":0}"#);
    let o = pargas(&["simulate", "--workload", s(&w), "--format", "json"]);
    let v = json(&o);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v["result"]["rows"][0]["gas_used"], "0");
    let bad = file(&dir, "bad.json", r#"{"blocks":1,"mystery":true}"#);
    assert_eq!(
        pargas(&["simulate", "--workload", s(&bad)]).status.code(),
        Some(2)
    );
}
