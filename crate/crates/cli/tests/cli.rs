use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn qeqlog(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qeqlog")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let value = if stdout.trim().is_empty() { Value::Null } else { serde_json::from_str(&stdout).unwrap() };
    (out.status.code().unwrap(), value, String::from_utf8(out.stderr).unwrap())
}

fn ws(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn check_model_exit_codes() {
    let swap = ws("swap.json");
    let (code, out, _) = qeqlog(&["check-model", "--workspace", &swap, "--algebra", "swap", "--theory", "empty"]);
    assert_eq!(code, 0);
    assert_eq!(out["report"]["is_model"], true);

    let (code, out, _) = qeqlog(&["check-model", "--workspace", &swap, "--algebra", "swap", "--theory", "fixed"]);
    assert_eq!(code, 1);
    assert_eq!(out["report"]["counterexample"]["a"], "p");

    let (code, out, err) = qeqlog(&["check-model", "--workspace", &swap, "--algebra", "nope", "--theory", "fixed"]);
    assert_eq!(code, 2);
    assert_eq!(out, Value::Null);
    assert!(err.contains("nope"));
}

#[test]
fn collapse_distance_is_zero() {
    let (code, out, _) =
        qeqlog(&["distance", "--workspace", &ws("phi1.json"), "--theory", "phi1", "--space", "A", "--lhs", "a", "--rhs", "b"]);
    assert_eq!(code, 0);
    assert_eq!(out["distance"], "0");
    assert_eq!(out["same_class"], true);
    assert_eq!(out["grid"], 4);
    assert_eq!(out["depth"], 1);

    let (code, out, _) = qeqlog(&["free", "--workspace", &ws("phi1.json"), "--theory", "phi1", "--space", "A"]);
    assert_eq!(code, 0);
    assert_eq!(out["algebra"]["classes"].as_array().unwrap().len(), 1);
}

#[test]
fn derive_with_and_without_epsilon() {
    let swap = ws("swap.json");
    let base = ["derive", "--workspace", &swap, "--theory", "involution", "--space", "A"];
    let run = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        qeqlog(&args)
    };
    let (code, out, _) = run(&["--lhs", "u(u(a))", "--rhs", "a", "--trace"]);
    assert_eq!(code, 0);
    assert_eq!(out["derivable"], true);
    assert_eq!(out["trace"]["conclusion"], "u(u(a)) = a");

    let (code, out, _) = run(&["--lhs", "u(a)", "--rhs", "a"]);
    assert_eq!(code, 1);
    assert_eq!(out["distance"], "1");

    let (code, _, _) = run(&["--lhs", "u(a)", "--rhs", "a", "--eps", "1"]);
    assert_eq!(code, 0);

    let (code, _, err) = run(&["--lhs", "u(u(u(u(a))))", "--rhs", "a"]);
    assert_eq!(code, 2);
    assert!(err.contains("universe"));
}

#[test]
fn monad_laws_on_empty_signature() {
    for space in ["A", "B"] {
        let (code, out, _) =
            qeqlog(&["monad-laws", "--workspace", &ws("empty_signature.json"), "--theory", "empty", "--space", space]);
        assert_eq!(code, 0);
        let laws = out["laws"].as_array().unwrap();
        assert_eq!(laws.len(), 3);
        for law in laws {
            assert_eq!(law["failed"], 0);
            assert_eq!(law["skipped_overflow"], 0);
        }
    }
}

#[test]
fn ump_on_swap_algebra() {
    let swap = ws("swap.json");
    let (code, out, _) = qeqlog(&[
        "ump", "--workspace", &swap, "--theory", "involution", "--space", "A", "--algebra", "swap", "--map", "a=p",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out["exists"], true);
    assert_eq!(out["unique"], true);
    assert_eq!(out["extension"]["[u(a)]"], "q");

    let (code, _, _) = qeqlog(&[
        "ump", "--workspace", &swap, "--theory", "involution", "--space", "A", "--algebra", "swap", "--map", "a=z",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn entailment_against_a_catalog() {
    let swap = ws("swap.json");
    let args = |lhs: &'static str| {
        vec!["entail", "--workspace", &swap, "--theory", "involution", "--space", "A", "--lhs", lhs, "--rhs", "a", "--catalog", "swap,still"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let run = |a: Vec<String>| qeqlog(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let (code, out, _) = run(args("u(u(a))"));
    assert_eq!(code, 0);
    assert_eq!(out["models"], serde_json::json!(["swap", "still"]));
    let (code, out, _) = run(args("u(a)"));
    assert_eq!(code, 1);
    assert_eq!(out["refuted_by"]["algebra"], "swap");
}

#[test]
fn em_check_round_trips_models_only() {
    let swap = ws("swap.json");
    let (code, out, _) = qeqlog(&["em-check", "--workspace", &swap, "--theory", "involution", "--algebra", "swap"]);
    assert_eq!(code, 0);
    assert_eq!(out["round_trip"], true);
    assert_eq!(out["h"]["[u(p)]"], "q");
    let (code, _, _) = qeqlog(&["em-check", "--workspace", &swap, "--theory", "fixed", "--algebra", "swap"]);
    assert_eq!(code, 1);
}

#[test]
fn output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("ws.json");
    std::fs::copy(fixture("swap.json"), &copy).unwrap();
    let copy = copy.to_string_lossy().into_owned();
    let run = |path: &str| {
        Command::new(env!("CARGO_BIN_EXE_qeqlog"))
            .args(["free", "--workspace", path, "--theory", "involution", "--space", "A", "--trace"])
            .output()
            .unwrap()
            .stdout
    };
    let first = run(&ws("swap.json"));
    assert!(!first.is_empty());
    assert_eq!(first, run(&ws("swap.json")));
    assert_eq!(first, run(&copy));
}

#[test]
fn grid_mismatch_is_an_error() {
    let (code, _, err) = qeqlog(&[
        "distance", "--workspace", &ws("phi1.json"), "--grid", "3", "--theory", "phi1", "--space", "A", "--lhs", "a", "--rhs", "b",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("grid"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"grid": 4, "spec": {"preset": "MET"}, "theories": {"t": {"judgments": [{"context": "missing", "lhs": "a", "rhs": "a"}]}}}"#,
    )
    .unwrap();
    let (code, _, err) = qeqlog(&["free", "--workspace", path.to_str().unwrap(), "--theory", "t", "--space", "A"]);
    assert_eq!(code, 2);
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn budgets_are_enforced() {
    let (code, _, err) = qeqlog(&[
        "distance", "--workspace", &ws("swap.json"), "--budget-instances", "3", "--theory", "involution", "--space", "A", "--lhs", "a", "--rhs", "a",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("budget"), "{err}");
}
