//! End-to-end tests of the command-line binary: exit codes, report
//! formats, and byte-stable exports.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treefactor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf8 stdout")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

/// Per-test scratch directory; tests run in parallel, so the name keys it.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("treefactor-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

const TWO_VERTEX_CONFIG: &str = concat!(
    r#"{"bounds":{"factors":1,"passes":2,"vertices":2},"#,
    r#""edges":[[0,1]],"parent":[null,0],"classes":[null,[0,0]]}"#
);

#[test]
fn validate_builtin_prints_normalized_spec() {
    let output = run(&["validate", "k2-family"]);
    assert_eq!(code(&output), 0);
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).expect("json");
    assert!(value["factors"].is_array());
}

#[test]
fn validate_rejects_all_finite_factor() {
    let dir = scratch("all-finite");
    let normalized = stdout(&run(&["validate", "k2-family"]));
    let mutated = normalized
        .replace("\"multiplicity\": \"omega\"", "\"multiplicity\": 3")
        .replace("\"repeat\": \"omega\"", "\"repeat\": 1");
    assert_ne!(normalized, mutated);
    let path = dir.join("finite.json");
    fs::write(&path, mutated).expect("write spec");

    let output = run(&["validate", path.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 2);
    assert!(stdout(&output).contains("factor template 0"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn validate_rejects_malformed_json() {
    let dir = scratch("malformed-spec");
    let path = dir.join("bad.json");
    fs::write(&path, "not a spec").expect("write file");
    let output = run(&["validate", path.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 2);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn ball_radius_zero_is_a_single_vertex() {
    let output = run(&[
        "ball",
        "--spec",
        "k2-family",
        "--radius",
        "0",
        "--sons",
        "1",
        "--factors",
        "1",
    ]);
    assert_eq!(code(&output), 0);
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).expect("json");
    assert_eq!(value["vertices"].as_array().expect("vertices").len(), 1);
    assert_eq!(value["edges"].as_array().expect("edges").len(), 0);
    assert_eq!(value["vertices"][0]["address"], "/");
}

#[test]
fn ball_exports_are_byte_identical_across_runs() {
    let args = [
        "ball",
        "--spec",
        "k2-family",
        "--radius",
        "3",
        "--sons",
        "4",
        "--factors",
        "6",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);

    let value: serde_json::Value = serde_json::from_str(&stdout(&first)).expect("json");
    assert_eq!(value["vertices"].as_array().expect("vertices").len(), 85);
    assert_eq!(value["edges"].as_array().expect("edges").len(), 84);
}

#[test]
fn ball_dot_export_carries_factor_attributes() {
    let output = run(&[
        "ball",
        "--spec",
        "k2-family",
        "--radius",
        "1",
        "--sons",
        "2",
        "--factors",
        "2",
        "--format",
        "dot",
    ]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert!(text.starts_with("graph window {"));
    assert!(text.contains("factor=0"));
    assert!(text.contains("factor=1"));
}

#[test]
fn ball_out_flag_writes_the_same_bytes_as_stdout() {
    let dir = scratch("ball-out");
    let path = dir.join("window.json");
    let args = [
        "ball",
        "--spec",
        "star-mix",
        "--radius",
        "2",
        "--sons",
        "3",
        "--factors",
        "3",
    ];
    let on_stdout = run(&args);
    let mut with_out: Vec<&str> = args.to_vec();
    with_out.extend(["--out", path.to_str().expect("utf8 path")]);
    let to_file = run(&with_out);
    assert_eq!(code(&to_file), 0);
    assert!(stdout(&to_file).is_empty());
    assert_eq!(fs::read(&path).expect("written file"), on_stdout.stdout);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn point_queries_print_plain_answers() {
    let label = run(&[
        "label",
        "--spec",
        "k2-family",
        "--address",
        "/",
        "--factor",
        "2",
    ]);
    assert_eq!(code(&label), 0);
    assert_eq!(stdout(&label), "0\n");

    let vertex = run(&[
        "vertex",
        "--spec",
        "k2-family",
        "--factor",
        "1",
        "--index",
        "0",
    ]);
    assert_eq!(code(&vertex), 0);
    assert_eq!(stdout(&vertex), "/\n");

    let edge = run(&[
        "edge",
        "--spec",
        "k2-family",
        "--address",
        "/",
        "--slot",
        "0",
    ]);
    assert_eq!(code(&edge), 0);
    let value: serde_json::Value = serde_json::from_str(&stdout(&edge)).expect("json");
    assert_eq!(value["factor"], 0);
    assert_eq!(value["i"], 0);
    assert_eq!(value["j"], 2);
}

#[test]
fn bad_address_syntax_is_a_usage_error() {
    let output = run(&[
        "label",
        "--spec",
        "k2-family",
        "--address",
        "3/1",
        "--factor",
        "0",
    ]);
    assert_eq!(code(&output), 2);
}

#[test]
fn verify_builtin_window_passes() {
    let output = run(&[
        "verify",
        "--spec",
        "k2-family",
        "--radius",
        "2",
        "--sons",
        "3",
        "--factors",
        "4",
    ]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert!(text.contains("\"verdict\": \"pass\""));
    assert!(!text.contains("\"verdict\": \"fail\""));
    assert!(text.contains("depth-law"));
}

#[test]
fn verify_pipeline_window_passes() {
    let output = run(&[
        "verify",
        "--spec",
        "mixed-finite",
        "--radius",
        "2",
        "--sons",
        "3",
        "--factors",
        "4",
        "--pipeline",
    ]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    assert!(text.contains("stage-one-spanning"));
    assert!(!text.contains("\"verdict\": \"fail\""));
}

#[test]
fn simulate_then_check_trace_round_trips() {
    let dir = scratch("round-trip");
    let config = dir.join("config.json");
    let trace = dir.join("trace.jsonl");
    fs::write(&config, TWO_VERTEX_CONFIG).expect("write config");

    let simulate = run(&[
        "simulate",
        "--config",
        config.to_str().expect("utf8 path"),
        "--trace",
        trace.to_str().expect("utf8 path"),
    ]);
    assert_eq!(code(&simulate), 0);
    assert!(stdout(&simulate).contains("c5_coverage"));

    let checked = run(&["check-trace", "--trace", trace.to_str().expect("utf8 path")]);
    assert_eq!(code(&checked), 0);
    let text = stdout(&checked);
    assert!(text.contains("d-vector-replay"));
    assert!(!text.contains("\"verdict\": \"fail\""));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn simulate_without_trace_flag_streams_jsonl() {
    let dir = scratch("stream");
    let config = dir.join("config.json");
    fs::write(&config, TWO_VERTEX_CONFIG).expect("write config");

    let output = run(&["simulate", "--config", config.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 0);
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    // One config line plus factors * passes * vertices step lines.
    assert_eq!(lines.len(), 5);
    let head: serde_json::Value = serde_json::from_str(lines[0]).expect("config line");
    assert!(head["bounds"].is_object());
    let step: serde_json::Value = serde_json::from_str(lines[1]).expect("step line");
    assert!(step["conditions"].is_array());
    fs::remove_dir_all(dir).ok();
}

#[test]
fn check_trace_flags_a_corrupted_step() {
    let dir = scratch("corrupt");
    let config = dir.join("config.json");
    let trace = dir.join("trace.jsonl");
    fs::write(&config, TWO_VERTEX_CONFIG).expect("write config");
    run(&[
        "simulate",
        "--config",
        config.to_str().expect("utf8 path"),
        "--trace",
        trace.to_str().expect("utf8 path"),
    ]);

    let text = fs::read_to_string(&trace).expect("trace written");
    let corrupted = text.replace("\"sigma_after\":1", "\"sigma_after\":9");
    assert_ne!(text, corrupted);
    fs::write(&trace, corrupted).expect("rewrite trace");

    let output = run(&["check-trace", "--trace", trace.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 1);
    assert!(stdout(&output).contains("\"verdict\": \"fail\""));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn check_trace_rejects_an_unparsable_file() {
    let dir = scratch("unparsable");
    let trace = dir.join("garbage.jsonl");
    fs::write(&trace, "this is not a trace\n").expect("write file");
    let output = run(&["check-trace", "--trace", trace.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 1);
    assert!(stdout(&output).contains("trace-syntax"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn malformed_simulator_config_is_a_usage_error() {
    let dir = scratch("bad-config");
    let config = dir.join("config.json");
    fs::write(&config, "{\"nope\":true}").expect("write file");
    let output = run(&["simulate", "--config", config.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 2);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["ball", "--spec", "k2-family"])), 2);
    assert_eq!(code(&run(&["--no-such-flag"])), 2);
    assert_eq!(
        code(&run(&[
            "label",
            "--spec",
            "/no/such/file",
            "--address",
            "/",
            "--factor",
            "0"
        ])),
        2
    );
}

#[test]
fn depth_cap_guards_ball_and_can_be_raised() {
    let capped = run(&[
        "ball",
        "--spec",
        "k2-family",
        "--radius",
        "7",
        "--sons",
        "1",
        "--factors",
        "1",
    ]);
    assert_eq!(code(&capped), 2);

    let raised = run(&[
        "ball",
        "--spec",
        "k2-family",
        "--radius",
        "7",
        "--sons",
        "1",
        "--factors",
        "1",
        "--max-depth",
        "8",
    ]);
    assert_eq!(code(&raised), 0);
}
