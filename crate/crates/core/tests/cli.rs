mod common;

use std::path::Path;
use std::process::{Command, Output};

use veriforge::{load_corpus, Corpus, Sample};

fn run(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(common::BIN);
    cmd.args(args);
    for p in paths {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("toy.jsonl");
    common::write_corpus(&p, &common::toy_corpus());
    p
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path());
    let out = dir.path().join("out.jsonl");
    let o = Command::new(common::BIN)
        .args(["dedup", "--sim-threshold", "1.5", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));
    assert!(!out.exists());

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[dedup]\nthreshhold = 0.5\n").unwrap();
    let o = run(&["report", "--dir"], &[dir.path()]);
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(common::BIN)
        .arg("--config")
        .arg(&cfg)
        .args(["report", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["pipeline", "--backend", "mock"], &[]);
    assert_eq!(o.status.code(), Some(2), "pipeline without an input path");
    let o = run(&["evaluate", "--no-such-flag"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stage_failure_exits_with_one_and_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    std::fs::write(
        &input,
        "{\"id\": \"a\", \"problem\": \"p\", \"solution\": \"s\"}\nnot json\n",
    )
    .unwrap();
    let o = Command::new(common::BIN)
        .args(["pipeline", "--backend", "mock", "--input"])
        .arg(&input)
        .arg("--output-dir")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ingest") && err.contains("line 2"), "{err}");
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = common::planted_corpus(5, 5, 2, 3);
    let input = dir.path().join("in.jsonl");
    common::write_corpus(&input, &corpus);
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[dedup]\nthreshold = 1.0\n").unwrap();
    let out = dir.path().join("out.jsonl");

    let base = |extra: &[&str]| {
        let o = Command::new(common::BIN)
            .arg("--config")
            .arg(&cfg)
            .arg("dedup")
            .args(extra)
            .arg("--input")
            .arg(&input)
            .arg("--output")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        load_corpus(&out).unwrap().len()
    };
    assert_eq!(base(&[]), 11, "config threshold keeps every near-duplicate");
    assert_eq!(base(&["--sim-threshold", "0.8"]), 7);
}

#[test]
fn single_stage_commands_write_records() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path());
    let compiled = dir.path().join("c.jsonl");
    let record = dir.path().join("c.json");
    let o = Command::new(common::BIN)
        .args(["compile-check", "--backend", "mock", "--input"])
        .arg(&input)
        .arg("--output")
        .arg(&compiled)
        .arg("--record")
        .arg(&record)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("compile: 50 -> 46"));
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    assert_eq!(rec["stage_log"][1]["stage"], "compile");
    assert_eq!(rec["results"].as_array().unwrap().len(), 50);

    let q = dir.path().join("q.jsonl");
    let o = Command::new(common::BIN)
        .args(["quality", "--input"])
        .arg(&compiled)
        .arg("--output")
        .arg(&q)
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("rejected style0 by lint"), "{text}");
    assert!(text.contains("CR-POS") && text.contains("local interpretation"));

    let v = dir.path().join("v.jsonl");
    let o = Command::new(common::BIN)
        .args(["verify", "--backend", "mock", "--workers", "3", "--input"])
        .arg(&q)
        .arg("--output")
        .arg(&v)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("sim_fail      2"));
    assert!(load_corpus(&v).unwrap().samples().iter().all(|s| s.verified));
}

#[test]
fn pipeline_resume_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy(dir.path());
    let full = dir.path().join("full");
    let o = Command::new(common::BIN)
        .args(["pipeline", "--backend", "mock", "--input"])
        .arg(&input)
        .arg("--output-dir")
        .arg(&full)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("overall"));

    let before = std::fs::read(full.join("04_verify.jsonl")).unwrap();
    let o = Command::new(common::BIN)
        .args(["pipeline", "--backend", "mock", "--from-stage", "dedup", "--input"])
        .arg(&input)
        .arg("--output-dir")
        .arg(&full)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(full.join("04_verify.jsonl")).unwrap(), before);

    let o = run(&["report", "--dir"], &[&full]);
    let text = stdout(&o);
    assert!(
        text.contains("Filtering funnel") && text.contains("Verification: 34 of 36 passed"),
        "{text}"
    );
    assert!(!text.contains("partial run"));

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = run(&["report", "--dir"], &[&empty]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("no artifacts found"));
}

fn bench(dir: &Path) -> std::path::PathBuf {
    let adder = "module add4(input [3:0] a, input [3:0] b, output [4:0] s);\n  assign s = a + b;\nendmodule\n";
    let samples = vec![
        Sample::new("easy", "Implement a 4-bit adder.", adder).with_testbench("module tb;\nendmodule\n"),
        Sample::new(
            "hard",
            "Design a multi-module pipeline with a finite state machine and a fifo between stages.",
            adder,
        )
        .with_testbench("module tb;\n  // mock: fail\nendmodule\n"),
    ];
    let p = dir.join("bench.jsonl");
    common::write_corpus(&p, &Corpus::new(samples).unwrap());
    p
}

#[test]
fn evaluate_writes_passk_and_labels_external_values() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path());
    let out = dir.path().join("eval");
    let o = Command::new(common::BIN)
        .args(["evaluate", "--backend", "mock", "--n", "5", "--k", "1,5", "--benchmark"])
        .arg(&b)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(
        text.contains("1      0.5000") && text.contains("5      0.5000"),
        "{text}"
    );
    assert!(text.contains("[external;"));
    let passk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("passk.json")).unwrap()).unwrap();
    assert_eq!(passk["pass_at"]["1"], 0.5);
}

#[test]
fn route_reports_plans_and_compares_modes() {
    let dir = tempfile::tempdir().unwrap();
    let b = bench(dir.path());
    let o = run(&["route", "--input"], &[&b]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("easy: easy (direct, budget 512)"), "{text}");
    assert!(text.contains("hard: hard (extended_reasoning, budget 4096)"), "{text}");

    let o = run(&["route", "--mode", "medium", "--input"], &[&b]);
    assert!(stdout(&o).lines().all(|l| l.contains("budget 1280")));

    let out = dir.path().join("cmp");
    let o = Command::new(common::BIN)
        .args(["route", "--compare", "--backend", "mock", "--input"])
        .arg(&b)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(
        text.contains("(base)") && text.contains("whitespace-delimited proxy"),
        "{text}"
    );
    assert!(out.join("efficiency.json").is_file());
    let o = run(&["report", "--dir"], &[&out]);
    assert!(stdout(&o).contains("Token efficiency"));

    let templates = dir.path().join("tpl");
    std::fs::create_dir(&templates).unwrap();
    std::fs::write(templates.join("direct.txt"), "no placeholder here").unwrap();
    let o = Command::new(common::BIN)
        .args(["route", "--templates-dir"])
        .arg(&templates)
        .arg("--input")
        .arg(&b)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
