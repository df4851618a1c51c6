//! Drives the installed binary end to end: exit codes, text output, JSON
//! shapes, and file writing. Scratch files live under the target tmpdir.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const PALINDROME_TABLE: &str = "\
a(+x) : _
b(+x) : _
E : _
v0(ox) : a v0 a x, a a x, a x, b v0 b x, b b x, b x
";

const INVALID_TABLE: &str = "\
a(-x) : _
b(+y) : a y
";

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).expect("tmpdir exists");
    dir.join(name)
}

fn copse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copse")).args(args).output().expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

#[test]
fn check_accepts_clean_table_and_flags_bad_variance() {
    let clean = scratch("clean.table");
    fs::write(&clean, PALINDROME_TABLE).unwrap();
    let output = copse(&["check", clean.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout_of(&output).contains("well-formed"));

    let dirty = scratch("dirty.table");
    fs::write(&dirty, INVALID_TABLE).unwrap();
    let output = copse(&["check", dirty.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout_of(&output).contains("WF-VARIANCE"));

    let output = copse(&["--json", "check", dirty.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let body: serde_json::Value = serde_json::from_str(&stdout_of(&output)).expect("valid JSON");
    assert_eq!(body["wellFormed"], serde_json::json!(false));
    assert!(!body["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn classify_reports_features_and_decider() {
    let table = scratch("classify.table");
    fs::write(&table, PALINDROME_TABLE).unwrap();
    let output = copse(&["classify", table.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "expansive table is still decidable");
    let text = stdout_of(&output);
    assert!(text.contains("expansive=yes") && text.contains("decider:"), "got: {text}");

    let output = copse(&["--json", "classify", table.to_str().unwrap()]);
    let body: serde_json::Value = serde_json::from_str(&stdout_of(&output)).expect("valid JSON");
    assert_eq!(body["decidable"], serde_json::json!(true));
}

#[test]
fn member_exit_code_tracks_verdict() {
    let table = scratch("member.table");
    fs::write(&table, PALINDROME_TABLE).unwrap();
    let holds = copse(&["member", table.to_str().unwrap(), "v0(E) <: a(a(E))"]);
    assert_eq!(holds.status.code(), Some(0));
    assert!(stdout_of(&holds).contains("holds"));

    let fails = copse(&["member", table.to_str().unwrap(), "v0(E) <: a(b(E))"]);
    assert_eq!(fails.status.code(), Some(1));
    assert!(stdout_of(&fails).contains("fails"));

    let json = copse(&["--json", "member", table.to_str().unwrap(), "v0(E) <: a(a(E))"]);
    let body: serde_json::Value = serde_json::from_str(&stdout_of(&json)).expect("valid JSON");
    assert_eq!(body["verdict"], serde_json::json!("holds"));
    assert!(body["trace"].is_object(), "positive verdicts carry a replayable trace");
}

#[test]
fn convert_emits_round_trippable_table_and_gnf() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/Canvas.cfg");
    let output = copse(&["convert", fixture, "--to", "table"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout_of(&output);
    let round_trip = scratch("canvas.table");
    fs::write(&round_trip, &text).unwrap();
    let check = copse(&["check", round_trip.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0), "emitted table must parse and check");

    let output = copse(&["convert", fixture, "--to", "gnf"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout_of(&output);
    assert!(text.contains("# empty word: true"), "canvas derives the empty word: {text}");
    assert!(text.contains("::="));
}

#[test]
fn convert_extracts_regular_grammar_from_table() {
    let table = scratch("nesting.table");
    fs::write(&table, "N(-x) : _\nC : N N C\n").unwrap();
    let output = copse(&[
        "convert",
        table.to_str().unwrap(),
        "--to",
        "rtg",
        "--bottom",
        "C",
        "--sup",
        "N,C",
    ]);
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(stdout_of(&output).contains("C"));
}

#[test]
fn gen_writes_source_file() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/Canvas.cfg");
    let dir = scratch("gen-out");
    fs::create_dir_all(&dir).unwrap();
    let output = copse(&["gen", fixture, "--fluent", "-o", dir.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout_of(&output).starts_with("wrote "));
    let source = fs::read_to_string(dir.join("CanvasAPI.cs")).expect("file written");
    assert!(source.contains("namespace CanvasAPI {"));
    assert!(source.contains("enum CanvasToken"));
}

#[test]
fn bench_prints_csv_with_header() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/Palindrome.cfg");
    let output = copse(&["bench", fixture, "--sizes", "4,9", "--seed", "11"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout_of(&output);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("size,elapsed_ms,verdict"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("4,"));
    assert!(rows[1].starts_with("9,"));
}

#[test]
fn errors_exit_with_code_two() {
    let output = copse(&["check", "/nonexistent/path.table"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).starts_with("error:"));

    let table = scratch("undecided.table");
    fs::write(&table, PALINDROME_TABLE).unwrap();
    let output = copse(&["member", table.to_str().unwrap(), "not a query"]);
    assert_eq!(output.status.code(), Some(2));
}
