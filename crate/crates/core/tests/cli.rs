//! Exit codes and outputs of the `tsflow` binary.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use common::*;
use tsflow::decompose5::{metric_from_template, random_instance, TemplateKind};
use tsflow::graphcore::format_graph;
use tsflow::metric::format_metric;

fn run(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tsflow")).args(args).envs(env.iter().copied()).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tsflow-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn project_prints_the_point() {
    let dir = scratch("project");
    let m = write(&dir, "m.txt", &format_metric(&random_metric(&mut rng(1), 3)));
    let (code, out, _) = run(&["project", &m, "100,100,100"], &[]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["point"].as_array().unwrap().len(), 3);
    let (code, out, _) = run(&["--format", "text", "project", &m, "100,100,100"], &[]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.starts_with("point: ")));
}

#[test]
fn input_errors_exit_two() {
    let dir = scratch("input");
    let m = write(&dir, "m.txt", &format_metric(&random_metric(&mut rng(2), 3)));
    assert_eq!(run(&["project", &m, "1,x,3"], &[]).0, 2);
    assert_eq!(run(&["project", &m, "1,2"], &[]).0, 2);
    assert_eq!(run(&["project", "/nonexistent/metric", "1,2,3"], &[]).0, 2);
    assert_eq!(run(&["hard6", "--L", "1"], &[]).0, 2);
    assert_eq!(run(&["hard6", "--L", "6", "--snap-grid", "0"], &[]).0, 2);
    let g = write(&dir, "g.txt", &format_graph(&random_graph(&mut rng(3), 8, 4, 6)));
    assert_eq!(run(&["sparsify", &g], &[]).0, 2);
    let (code, _, err) = run(&["sparsify", &g, "--seed", "1"], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("at most 5 terminals"));
    assert_eq!(run(&["quality", &g, &g, "--random-demands", "2", "--seed", "1", "--epsilon", "2"], &[]).0, 2);
    assert_eq!(run(&["quality", &g, &g], &[]).0, 2);
}

#[test]
fn failed_bound_exits_one() {
    let (code, _, err) = run(&["hard6", "--L", "3"], &[]);
    assert_eq!(code, 1);
    assert!(err.contains("exceeds"));
}

#[test]
fn hard6_writes_instance_files() {
    let dir = scratch("hard6");
    let (code, out, _) = run(&["hard6", "--L", "4", "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["opt_within_bound"], Value::Bool(true));
    let graph = std::fs::read_to_string(dir.join("hard6_L4.graph")).unwrap();
    assert!(tsflow::graphcore::parse_graph(&graph).is_ok());
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("hard6_L4.json")).unwrap()).unwrap();
    assert!(sidecar.is_object());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = scratch("threads");
    let t = random_template(&mut rng(4), TemplateKind::Type2);
    let g = random_instance(&metric_from_template(&t).unwrap(), 8, 12, 4).unwrap();
    let g = write(&dir, "g.txt", &format_graph(&g));
    let args = ["sparsify", &g, "--seed", "7", "--samples", "200"];
    let (c1, one, _) = run(&args, &[("TSFLOW_THREADS", "1")]);
    let (c2, many, _) = run(&args, &[("TSFLOW_THREADS", "4")]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(one, many);
    let _ = std::fs::remove_dir_all(&dir);
}
