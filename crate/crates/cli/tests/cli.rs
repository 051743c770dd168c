use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const COUNTEREXAMPLE: &str = r#"{"K":3,"M":[10,8,6],"N":[10,8,6],"D":[[null,6,6],[5,null,6],[6,6,null]]}"#;
const REDUCIBLE: &str = r#"{"K":3,"M":[10,8,6],"N":[10,8,6],"D":[[null,8,3],[5,null,4],[6,2,null]]}"#;

fn halfcake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfcake"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dof(num: i64, den: i64) -> Value {
    json!({"num": num, "den": den})
}

#[test]
fn analyze_counterexample_reports_25_over_2() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", COUNTEREXAMPLE);
    let out = halfcake(&["analyze", "--spec", p(&spec)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_ne!(r["verdict"]["status"], "OPTIMAL_CERTIFIED");
    assert_eq!(r["half_cake"], dof(12, 1));
    assert_eq!(r["achievable"], dof(25, 2));
    // no bound below what is achieved
    let bound = &r["outer_bound"]["best"]["bound"];
    let b = bound["num"].as_i64().unwrap() as f64 / bound["den"].as_i64().unwrap() as f64;
    assert!(b >= 12.5);
    assert!(r["outer_bound"]["best"]["plan"].is_object());
}

#[test]
fn analyze_reducible_is_optimal() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", REDUCIBLE);
    let out = halfcake(&["analyze", "--spec", p(&spec)]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["verdict"]["status"], "OPTIMAL_CERTIFIED");
    assert_eq!(r["sum_dof"], dof(12, 1));
    assert!(r["verdict"]["certificate"].is_array());
}

#[test]
fn malformed_spec_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{\"K\": 3, \"M\": [1,");
    let out = halfcake(&["analyze", "--spec", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let too_big = write(&dir, "big.json", r#"{"K":2,"M":[2,2],"N":[2,2],"D":[[null,3],[1,null]]}"#);
    assert_eq!(halfcake(&["feasibility", "--spec", p(&too_big)]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(halfcake(&["feasibility", "--spec", p(&missing)]).status.code(), Some(2));
    assert_eq!(halfcake(&["feasibility"]).status.code(), Some(2));
}

#[test]
fn feasibility_counterexample_has_cut() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", COUNTEREXAMPLE);
    let out = halfcake(&["feasibility", "--spec", p(&spec)]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["flow"]["feasible"], false);
    let cut = &r["flow"]["cut"];
    assert!(cut["max_flow"].as_u64().unwrap() < cut["required"].as_u64().unwrap());
}

#[test]
fn sample_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", COUNTEREXAMPLE);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        let out = halfcake(&["sample", "--spec", p(&spec), "--seed", "7", "--out", p(path)]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let other = dir.path().join("c.json");
    halfcake(&["sample", "--spec", p(&spec), "--seed", "8", "--out", p(&other)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&other).unwrap());
}

#[test]
fn verify_ergodic_scheme_file() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", COUNTEREXAMPLE);
    let channel = dir.path().join("channel.json");
    let scheme = dir.path().join("scheme.json");
    let out = halfcake(&[
        "sample",
        "--spec",
        p(&spec),
        "--ergodic",
        "--seed",
        "3",
        "--scheme-out",
        p(&scheme),
        "--out",
        p(&channel),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = halfcake(&["verify", "--spec", p(&spec), "--channel", p(&channel), "--scheme", p(&scheme)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = stdout_json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["sum_dof"], dof(12, 1));

    // break one interference equation
    let mut s: Value = serde_json::from_str(&fs::read_to_string(&scheme).unwrap()).unwrap();
    s["users"][0]["V"][0][0] = json!([5.0, -3.0]);
    let broken = write(&dir, "broken.json", &s.to_string());
    let out = halfcake(&["verify", "--spec", p(&spec), "--channel", p(&channel), "--scheme", p(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["pass"], false);

    let wrong = write(&dir, "wrong.json", r#"{"n":2,"users":[]}"#);
    let out = halfcake(&["verify", "--spec", p(&spec), "--channel", p(&channel), "--scheme", p(&wrong)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bound_with_plan_and_witness_channel() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "spec.json", COUNTEREXAMPLE);
    let plan = write(
        &dir,
        "plan.json",
        r#"{"mu":[2,2,2],"assign":"mirror","partition":[[[1,1],[2,1],[3,1]],[[1,2],[2,2],[3,2]]]}"#,
    );
    let out = halfcake(&["bound", "--spec", p(&spec), "--plan", p(&plan)]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["bound"]["bound"], dof(25, 2));
    assert_eq!(r["bound"]["rank"], 23);

    let channel = dir.path().join("channel.json");
    halfcake(&["sample", "--spec", p(&spec), "--domain", "prime-field", "--out", p(&channel)]);
    let out = halfcake(&["bound", "--spec", p(&spec), "--plan", p(&plan), "--channel", p(&channel)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["bound"]["rank"], 23);

    let bad_plan = write(&dir, "bad.json", r#"{"mu":[2,2,3],"assign":"mirror","partition":[[],[]]}"#);
    assert_eq!(halfcake(&["bound", "--spec", p(&spec), "--plan", p(&bad_plan)]).status.code(), Some(2));
}

#[test]
fn bound_search_on_2x3() {
    let out = halfcake(&["bound", "--preset", "example-2x3", "--mu-max", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["bound"]["bound"], dof(18, 5));
}

#[test]
fn reproduce_targets_pass() {
    for target in ["counterexample", "example-2x3", "example-asym", "theorem5", "theorem6", "lemma1-equiv"] {
        let out = halfcake(&["reproduce", target]);
        assert_eq!(out.status.code(), Some(0), "{target}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(stdout_json(&out)["pass"], true);
    }
    assert_eq!(halfcake(&["reproduce", "nope"]).status.code(), Some(2));
}

#[test]
fn reproduce_mismatch_exits_1() {
    // a residual tolerance no floating-point scheme can meet
    let out = halfcake(&["reproduce", "counterexample", "--tol", "0"]);
    let r = stdout_json(&out);
    if r["checks"][2]["observed"].as_f64() == Some(0.0) {
        return;
    }
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(r["pass"], false);
}
