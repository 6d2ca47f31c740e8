use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agwf_core::event_log::{discover_dfg, EventLog};
use agwf_core::pm_tools::{abstract_dfg, DEFAULT_DFG_TOP_K};
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn demos() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/demos")
}

fn agwf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agwf"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("AGWF_ENDPOINT")
        .output()
        .expect("the binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_accepts_demo_workflows() {
    for name in ["violations", "fairness", "rca"] {
        let path = demos().join(format!("{name}.json"));
        let out = agwf(&["validate", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stdout(&out));
        assert!(stdout(&out).starts_with("valid: "));
    }
}

#[test]
fn validate_reports_cycles() {
    let out = agwf(&["validate", "cyclic.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("CycleDetected"));
}

#[test]
fn validate_rejects_malformed_json() {
    let out = agwf(&["validate", "broken.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid workflow document"));
}

#[test]
fn run_matches_golden_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.json");
    let out = agwf(&[
        "run",
        "fig2.json",
        "--inquiry",
        "Describe @log",
        "--scripted",
        "fig2.rules.json",
        "--load",
        "log=two_traces.xes",
        "--output",
        transcript.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        stdout(&out).trim(),
        "The process is clean apart from a one-hour wait before shipping."
    );
    let actual: Value =
        serde_json::from_str(&std::fs::read_to_string(&transcript).unwrap()).unwrap();
    let golden: Value = serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("fig2.transcript.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(actual, golden);
    assert_eq!(
        actual["task_sequence"],
        serde_json::json!(["T1", "T2", "T3", "T4"])
    );
    let last = actual["states"][4].as_str().unwrap();
    assert_eq!(last.matches("\n=== output of ").count(), 4);
}

#[test]
fn run_without_the_log_reports_tool_error() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.json");
    let out = agwf(&[
        "run",
        "fig2.json",
        "--inquiry",
        "Describe @log",
        "--scripted",
        "fig2.rules.json",
        "--output",
        transcript.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = std::fs::read_to_string(&transcript).unwrap();
    assert!(text.contains("TOOL-ERROR"));
}

#[test]
fn run_with_unreadable_log_is_a_usage_error() {
    let out = agwf(&[
        "run",
        "fig2.json",
        "--inquiry",
        "q",
        "--scripted",
        "fig2.rules.json",
        "--load",
        "log=missing.xes",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_requires_a_backend() {
    let out = agwf(&["run", "fig2.json", "--inquiry", "q"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn abstract_matches_library_output() {
    let out = agwf(&["abstract", "two_traces.xes", "--kind", "dfg"]);
    assert_eq!(out.status.code(), Some(0));
    let log = EventLog::from_path(fixtures().join("two_traces.xes")).unwrap();
    let expected = abstract_dfg(&discover_dfg(&log), DEFAULT_DFG_TOP_K);
    assert_eq!(stdout(&out), expected + "\n");
}

#[test]
fn abstract_variants_top_k() {
    let out = agwf(&[
        "abstract",
        "two_traces.xes",
        "--kind",
        "variants",
        "--top-k",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().skip(1).count(), 1);
}

#[test]
fn abstract_bad_inputs() {
    assert_eq!(
        agwf(&["abstract", "nope.xes", "--kind", "dfg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        agwf(&[
            "abstract",
            "two_traces.xes",
            "--kind",
            "dfg",
            "--top-k",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn scripted_demos_succeed() {
    for name in ["violations", "fairness", "rca"] {
        let out = agwf(&["demo", name]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!stdout(&out).trim().is_empty());
    }
}

#[test]
fn unknown_demo_is_a_usage_error() {
    assert_eq!(agwf(&["demo", "nope"]).status.code(), Some(2));
}

#[test]
fn http_without_endpoint_is_a_usage_error() {
    assert_eq!(agwf(&["demo", "rca", "--http"]).status.code(), Some(2));
}

#[test]
fn tools_lists_builtin_tools() {
    let out = agwf(&["tools"]);
    assert_eq!(out.status.code(), Some(0));
    for tool in ["dfg_discovery", "variants_discovery"] {
        assert!(stdout(&out).contains(tool));
    }
}
