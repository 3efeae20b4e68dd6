use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn sample(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn gadgets(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gadgets")).args(args).output().expect("spawn gadgets")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn s(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_accepts_valid_systems() {
    for f in ["six_system.json", "grow_doors.json", "g4_x_system.json"] {
        let o = gadgets(&["check", s(&sample(f))]);
        assert_eq!(code(&o), 0, "{f}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout_json(&o)["diagnostics"], Value::Array(vec![]));
    }
}

#[test]
fn truncated_input_is_an_input_error() {
    let text = std::fs::read_to_string(sample("grow_doors.json")).unwrap();
    let cut = scratch("truncated.json");
    std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
    let o = gadgets(&["check", s(&cut)]);
    assert_eq!(code(&o), 3);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("line"), "{stderr}");
    assert!(stdout_json(&o)["errors"].as_array().is_some_and(|e| !e.is_empty()));
}

#[test]
fn missing_file_and_bad_location_are_input_errors() {
    assert_eq!(code(&gadgets(&["check", "/nonexistent/system.json"])), 3);
    let o = gadgets(&["solve1", s(&sample("grow_doors.json")), "--target", "nowhere"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn cover_and_produce() {
    let net = sample("grow.json");
    let o = gadgets(&["cover", s(&net), "--target", "1,5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["coverable"], true);
    assert_eq!(code(&gadgets(&["cover", s(&net), "--target", "2,0"])), 1);
    assert_eq!(code(&gadgets(&["cover", s(&net), "--target", "1"])), 3);
    assert_eq!(code(&gadgets(&["produce", s(&net), "--dish", "b"])), 0);
}

#[test]
fn reach_exact_reports_budget() {
    let net = sample("grow.json");
    let o = gadgets(&["reach-exact", s(&net), "--target", "1,3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["rules"].as_array().unwrap().len(), 3);
    let o = gadgets(&["reach-exact", s(&net), "--target", "0,3"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stdout_json(&o)["result"], "no-within-bounds");
}

#[test]
fn equiv_counter_agrees() {
    let o = gadgets(&["equiv-counter", s(&sample("six.cm")), "--steps", "50"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["report"], "agree");
    assert_eq!(v["interpreter"]["outcome"], "halted");
    assert!(String::from_utf8_lossy(&o.stderr).contains("agree"));
}

#[test]
fn compiled_counter_matches_sample() {
    let o = gadgets(&["compile-counter", s(&sample("six.cm"))]);
    assert_eq!(code(&o), 0);
    let want: Value = serde_json::from_str(&std::fs::read_to_string(sample("six_system.json")).unwrap()).unwrap();
    assert_eq!(stdout_json(&o), want);
}

#[test]
fn sim0_trace_replays() {
    let sys = sample("six_system.json");
    let trace = scratch("six_trace.json");
    let o = gadgets(&["sim0", s(&sys), "--rounds", "40", "--target", "win", "--trace", s(&trace)]);
    assert_eq!(code(&o), 0);
    let digest = stdout_json(&o)["final_digest"].clone();
    let r = gadgets(&["replay", s(&sys), s(&trace)]);
    assert_eq!(code(&r), 0);
    let v = stdout_json(&r);
    assert_eq!(v["matches"], true);
    assert_eq!(v["final_digest"], digest);

    let mut t: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    t["final_digest"] = Value::from(t["final_digest"].as_u64().unwrap() ^ 1);
    let forged = scratch("six_trace_forged.json");
    std::fs::write(&forged, t.to_string()).unwrap();
    assert_eq!(code(&gadgets(&["replay", s(&sys), s(&forged)])), 1);
}

#[test]
fn sim0_target_out_of_budget() {
    let o = gadgets(&["sim0", s(&sample("six_system.json")), "--rounds", "5", "--target", "win"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn robot_reachability_on_doors() {
    let o = gadgets(&[
        "solve1",
        s(&sample("grow_doors.json")),
        "--config",
        s(&sample("grow_start.json")),
        "--target",
        "dish.b",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["reachable"], true);
}

#[test]
fn reconfig_witness_replays() {
    let sys = sample("grow_doors.json");
    let (from, to) = (sample("grow_start.json"), sample("grow_target.json"));
    let witness = scratch("grow_witness.json");
    let o = gadgets(&["reconfig", s(&sys), "--from", s(&from), "--to", s(&to), "--witness", s(&witness)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = gadgets(&["replay", s(&sys), s(&witness), "--from", s(&from), "--to", s(&to)]);
    assert_eq!(code(&r), 0);
    assert_eq!(stdout_json(&r)["matches"], true);
    // The swapped direction needs a token to vanish, which no door move does.
    assert_eq!(code(&gadgets(&["reconfig", s(&sys), "--from", s(&to), "--to", s(&from)])), 1);
}

#[test]
fn petri_round_trip_through_doors() {
    let out = scratch("grow_start_out.json");
    let o = gadgets(&["from-petri", s(&sample("grow.json")), "--config-out", s(&out)]);
    assert_eq!(code(&o), 0);
    let want: Value = serde_json::from_str(&std::fs::read_to_string(sample("grow_doors.json")).unwrap()).unwrap();
    assert_eq!(stdout_json(&o), want);
    let t = gadgets(&["to-petri", s(&sample("grow_doors.json")), "--config", s(&out)]);
    assert_eq!(code(&t), 0);
    let net = stdout_json(&t);
    assert_eq!(net["dishes"].as_array().unwrap().len(), net["start"].as_array().unwrap().len());
}

#[test]
fn g4_direct_and_via_gadgets() {
    let o = gadgets(&["g4", s(&sample("g4_x.json")), "--via-gadgets"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["value"], "win");
    assert_eq!(v["agree"], true);
    let e = gadgets(&["g4", s(&sample("g4_x.json")), "--emit-system"]);
    let want: Value = serde_json::from_str(&std::fs::read_to_string(sample("g4_x_system.json")).unwrap()).unwrap();
    assert_eq!(stdout_json(&e), want);
}

#[test]
fn solve2_value_and_strategy() {
    let strat = scratch("g4_strategy.json");
    let o = gadgets(&["solve2", s(&sample("g4_x_system.json")), "--at", "hub1", "--strategy", s(&strat)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["value"], "win");
    let table: Value = serde_json::from_str(&std::fs::read_to_string(&strat).unwrap()).unwrap();
    assert_eq!(table["format"], 1);
    assert!(!table["strategy"].as_array().unwrap().is_empty());
    let b = gadgets(&["solve2", s(&sample("g4_x_system.json")), "--at", "hub1", "--budget", "10"]);
    assert_eq!(code(&b), 2);
}

#[test]
fn boxes_verify() {
    for kind in ["l2t", "directed", "identity"] {
        let o = gadgets(&["verify-box", kind]);
        assert_eq!(code(&o), 0, "{kind}");
        assert_eq!(stdout_json(&o)["passed"], true);
    }
    let l2t = stdout_json(&gadgets(&["verify-box", "l2t"]));
    assert_eq!(l2t["crossing_lengths"], serde_json::json!([9]));
    assert_eq!(code(&gadgets(&["verify-box", "identity", "--gadget", "no-such-gadget"])), 3);
}
