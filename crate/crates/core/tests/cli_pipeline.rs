//! Drives the installed `complygen` binary through the whole pipeline on
//! the bundled financial fixture and checks files, exit codes, and rerun
//! determinism at the process boundary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_complygen"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn full_pipeline_via_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();

    let (code, _, err) = run(&[
        "extract",
        "--policy",
        &s(&fixture("financial.policy")),
        "--schema",
        &s(&fixture("financial.schema")),
        "--client",
        "replay",
        "--cassette",
        &s(&fixture("financial.cassette.json")),
        "--out",
        &s(&root.join("extract")),
    ]);
    assert_eq!(code, 0, "extract failed: {err}");
    let oracles = std::fs::read_to_string(root.join("extract/oracles.jsonl")).unwrap();
    let bundled = std::fs::read_to_string(fixture("financial.oracles.jsonl")).unwrap();
    assert_eq!(
        oracles, bundled,
        "replayed extraction drifts from bundled oracles"
    );

    let (code, _, err) = run(&[
        "fuzz",
        "--schema",
        &s(&fixture("financial.schema")),
        "--oracles",
        &s(&root.join("extract/oracles.jsonl")),
        "--lengths",
        "6,8",
        "--seeds",
        "8",
        "--out",
        &s(&root.join("fuzz")),
    ]);
    assert_eq!(code, 0, "fuzz failed: {err}");
    let traces: Vec<_> = std::fs::read_dir(root.join("fuzz/traces"))
        .unwrap()
        .collect();
    assert_eq!(traces.len(), 8);

    let (code, _, err) = run(&[
        "genbench",
        "--schema",
        &s(&fixture("financial.schema")),
        "--oracles",
        &s(&root.join("extract/oracles.jsonl")),
        "--traces",
        &s(&root.join("fuzz/traces")),
        "--out",
        &s(&root.join("bench")),
    ]);
    assert_eq!(code, 0, "genbench failed: {err}");
    assert!(root.join("bench/bundle.json").exists());

    // the reference solutions all pass
    let (code, _, err) = run(&[
        "eval",
        "--bundle",
        &s(&root.join("bench/bundle.json")),
        "--schema",
        &s(&fixture("financial.schema")),
        "--candidates",
        &s(&root.join("bench/solutions")),
        "--source",
        "reference",
        "--out",
        &s(&root.join("eval_ref")),
    ]);
    assert_eq!(code, 0, "reference eval failed: {err}");
    let report = std::fs::read_to_string(root.join("eval_ref/report.txt")).unwrap();
    assert!(report.contains("pass@1=100.0%"), "{report}");

    // the masked business traces must trip the safety oracle
    let (code, _, _) = run(&[
        "eval",
        "--bundle",
        &s(&root.join("bench/bundle.json")),
        "--schema",
        &s(&fixture("financial.schema")),
        "--candidates",
        &s(&root.join("bench/masked")),
        "--source",
        "masked",
        "--out",
        &s(&root.join("eval_masked")),
    ]);
    assert_eq!(code, 1);
    let results = std::fs::read_to_string(root.join("eval_masked/results.json")).unwrap();
    assert!(
        results.contains("unsafe_success") || results.contains("unsafe_failure"),
        "masked candidates produced no safety violations"
    );

    // coverage over the fuzzed traces
    let (code, _, err) = run(&[
        "coverage",
        "--schema",
        &s(&fixture("financial.schema")),
        "--traces",
        &s(&root.join("fuzz/traces")),
        "--out",
        &s(&root.join("cov")),
    ]);
    assert_eq!(code, 0, "coverage failed: {err}");
    assert!(root.join("cov/coverage.json").exists());

    // re-render the aggregate from the results file
    let (code, _, err) = run(&[
        "report",
        "--results",
        &s(&root.join("eval_masked/results.json")),
        "--out",
        &s(&root.join("rereport")),
    ]);
    assert_eq!(code, 0, "report failed: {err}");
    let a = std::fs::read_to_string(root.join("eval_masked/report.json")).unwrap();
    let b = std::fs::read_to_string(root.join("rereport/report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fuzz_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    for dir in ["one", "two"] {
        let (code, _, err) = run(&[
            "fuzz",
            "--schema",
            &s(&fixture("smarthome.schema")),
            "--oracles",
            &s(&fixture("smarthome.oracles.jsonl")),
            "--lengths",
            "7",
            "--seeds",
            "4",
            "--out",
            &s(&root.join(dir)),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    for entry in std::fs::read_dir(root.join("one/traces")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap();
        let other = root.join("two/traces").join(name);
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&other).unwrap(),
            "trace file {name:?} differs between reruns"
        );
    }
}

#[test]
fn extract_with_no_groundable_rules_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // a cassette whose only block names an unknown API
    let cassette = serde_json::json!({
        "interactions": [{
            "seq": 0,
            "prompt": "",
            "params": {"max_tokens": 2048, "temperature": 0.0},
            "completion": "RULE\ntemplate: operational_restriction\np1: ghost_api\np2: phantom_api\nexcerpt: \"identity must be verified\"\nrationale: x\nEND\n"
        }]
    });
    let cassette_path = tmp.path().join("cassette.json");
    std::fs::write(&cassette_path, cassette.to_string()).unwrap();
    let policy_path = tmp.path().join("policy.txt");
    std::fs::write(&policy_path, "identity must be verified").unwrap();
    let (code, _, _) = run(&[
        "extract",
        "--policy",
        &s(&policy_path),
        "--schema",
        &s(&fixture("financial.schema")),
        "--client",
        "replay",
        "--cassette",
        &s(&cassette_path),
        "--out",
        &s(&tmp.path().join("out")),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn impossible_oracle_set_exhausts_every_seed_and_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let oracles_path = tmp.path().join("impossible.jsonl");
    std::fs::write(
        &oracles_path,
        r#"{"id":"never","template":"freeform","formula":"false","provenance":""}"#,
    )
    .unwrap();
    let (code, _, _) = run(&[
        "fuzz",
        "--schema",
        &s(&fixture("financial.schema")),
        "--oracles",
        &s(&oracles_path),
        "--lengths",
        "4",
        "--seeds",
        "3",
        "--max-backtracks",
        "50",
        "--out",
        &s(&tmp.path().join("out")),
    ]);
    assert_eq!(code, 3);
    let report = std::fs::read_to_string(tmp.path().join("out/fuzz_report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["produced"], 0);
    assert_eq!(v["exhausted"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_schema_file_is_a_harness_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "fuzz",
        "--schema",
        "/nonexistent/nowhere.schema",
        "--oracles",
        &s(&fixture("financial.oracles.jsonl")),
        "--out",
        &s(&tmp.path().join("out")),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("nowhere.schema"), "{err}");
}

#[test]
fn live_mode_without_endpoint_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "extract",
            "--policy",
            &s(&fixture("financial.policy")),
            "--schema",
            &s(&fixture("financial.schema")),
            "--client",
            "live",
            "--out",
            &s(&tmp.path().join("out")),
        ])
        .env_remove("COMPLYGEN_API_ENDPOINT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("COMPLYGEN_API_ENDPOINT"), "{err}");
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config = serde_json::json!({ "seeds": 2, "lengths": [5] });
    let config_path = tmp.path().join("cfg.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    let (code, _, err) = run(&[
        "fuzz",
        "--schema",
        &s(&fixture("financial.schema")),
        "--oracles",
        &s(&fixture("financial.oracles.jsonl")),
        "--seeds",
        "9",
        "--lengths",
        "8",
        "--config",
        &s(&config_path),
        "--out",
        &s(&tmp.path().join("out")),
    ]);
    assert_eq!(code, 0, "{err}");
    let traces: Vec<_> = std::fs::read_dir(tmp.path().join("out/traces"))
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(traces.len(), 2, "config seeds=2 should win over --seeds 9");
    assert!(traces.iter().all(|n| n.contains("len05")), "{traces:?}");
}
