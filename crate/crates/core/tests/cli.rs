mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::corpus_path;
use milnor_cycles::analysis::AnalysisReport;
use milnor_cycles::Config;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_milnor-cycles"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus_arg(name: &str) -> String {
    corpus_path(name).display().to_string()
}

fn write_vf(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn critpoints_table_is_sorted_by_x() {
    let o = run(&["critpoints", &corpus_arg("fold-pair")]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][3], "-1");
    assert_eq!(rows[1][3], "1");
    let x: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(x[0] < x[1]);
}

#[test]
fn critpoints_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_vf(dir.path(), "empty.vf", "P = x^2 + y^2 + 1\nQ = x\n");
    let o = run(&["critpoints", &empty]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
    let bad = write_vf(dir.path(), "bad.vf", "P = x^^2\nQ = y\n");
    let o = run(&["critpoints", &bad]);
    assert_eq!(code(&o), 64);
    assert!(!stderr(&o).is_empty());
    assert_eq!(code(&run(&["critpoints", "/nonexistent.vf"])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["critpoints", &empty, "--grid", "-3"])), 64);
}

#[test]
fn fiber_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fiber.svg");
    let json = dir.path().join("fiber.json");
    let src = corpus_arg("radial-source");
    let o = run(&[
        "fiber",
        &src,
        "--point",
        "0",
        "--svg",
        svg.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(s.matches("<path").count(), 1);
    assert_eq!(s.matches("Z\"").count(), 1);
    let f: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(f["components"].as_array().unwrap().len(), 1);

    assert_eq!(code(&run(&["fiber", &src, "--point", "9"])), 65);
    let o = run(&["fiber", &src, "--point", "0", "--eta", "1e6"]);
    assert_eq!(code(&o), 65);
    assert!(stderr(&o).contains("η_max"));
    assert_eq!(code(&run(&["fiber", &src, "--point", "0", "--eta=-1"])), 65);
}

#[test]
fn analyze_writes_report_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let svg = dir.path().join("portrait.svg");
    let o = run(&[
        "analyze",
        &corpus_arg("linear-center"),
        "--json",
        json.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: AnalysisReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.bound, 1);
    assert!(report.detected.is_empty());
    assert_eq!(report.config_echo, Config::default());
    assert!(!report.figures.is_empty());
    for f in &report.figures {
        assert!(std::fs::metadata(f).unwrap().len() > 0, "{f}");
    }
}

#[test]
fn analyze_zero_curve_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let o = run(&["analyze", &corpus_arg("zero-curve"), "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["verdict"], "inconclusive");
    assert!(v["reasons"][0].as_str().unwrap().contains("DepthLimitExceeded"));
}

#[test]
fn flags_reach_the_config_echo() {
    let o = run(&["--show-config", "--grid", "128", "--seed", "9", "--delta-cap", "1.5"]);
    assert_eq!(code(&o), 0);
    let c: Config = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c.fiber.grid, 128);
    assert_eq!(c.seed, 9);
    assert_eq!(c.fiber.delta_cap, 1.5);
    let o = run(&["--show-config"]);
    assert_eq!(serde_json::from_str::<Config>(&stdout(&o)).unwrap(), Config::default());
    assert_eq!(code(&run(&["--show-config", "--grid", "512", "--max-grid", "256"])), 64);
}

#[test]
fn cycles_exports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cycles.csv");
    let svg = dir.path().join("cycles.svg");
    let o = run(&[
        "cycles",
        &corpus_arg("cubic-one-cycle"),
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("cycle,t,x,y"));
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((f[2].hypot(f[3]) - 1.0).abs() < 1e-6);
    }
    assert!(std::fs::metadata(&svg).unwrap().len() > 0);
}

#[test]
fn morsify_usage_and_repeatability() {
    let src = corpus_arg("linear-center");
    assert_eq!(code(&run(&["morsify", &src, "--s", ""])), 64);
    let args = ["morsify", src.as_str(), "--s", "1e-3", "--seeds", "4"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 3);
}
