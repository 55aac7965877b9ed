use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use toolplay::selfplay::iteration_seed;
use toolplay::taskspec::{PromptBundle, SpecDistribution};
use toolplay::world::ScriptedWorld;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toolplay"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn toolplay")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Scripted fixtures plus a config pointing at them.
fn world_dir(pool: usize, output: usize, extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let seeds = [7, iteration_seed(7, 1), iteration_seed(7, 2)];
    let world = ScriptedWorld::build_many(&SpecDistribution::default(), &seeds, pool, &PromptBundle::default()).unwrap();
    world.write_fixtures(dir.path()).unwrap();
    std::fs::write(dir.path().join("config.toml"), ScriptedWorld::config_toml(7, pool, output, extra)).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_and_flag_fail() {
    let o = run(&["transmogrify"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(!run(&["sample-specs", "--nope"]).status.success());
    assert!(!run(&["--format", "xml", "sample-specs"]).status.success());
}

#[test]
fn sample_specs_formats() {
    let lines = stdout(&run(&["--seed", "5", "sample-specs", "--count", "4"]));
    assert_eq!(lines.lines().count(), 4);
    let pretty = stdout(&run(&["--seed", "5", "--format", "pretty", "sample-specs", "--count", "4"]));
    let arr: Vec<serde_json::Value> = serde_json::from_str(&pretty).unwrap();
    let from_lines: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(arr, from_lines);
}

#[test]
fn score_solver_batch_gives_one_breakdown_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch.lines");
    let gold = r#"[{"name":"f","arguments":{"a":1}}]"#;
    let lines = [
        format!(r#"{{"completion":"<tool_call_answer>{}</tool_call_answer>","context":{{"gold_calls":{gold}}}}}"#, gold.replace('"', "\\\"")),
        format!(r#"{{"completion":"","context":{{"gold_calls":{gold}}}}}"#),
        format!(r#"{{"completion":"<tool_call_answer>[{{\"name\":\"g\"}}]</tool_call_answer>","context":{{"gold_calls":{gold}}}}}"#),
    ];
    std::fs::write(&batch, lines.join("\n") + "\n").unwrap();
    let out = stdout(&run(&["score", "--role", "solver", "--in", s(&batch)]));
    let results: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(results.len(), 3);
    assert_eq!(results[0]["breakdown"]["fmt"], 1.0);
    assert_eq!(results[0]["breakdown"]["acc"], 1.0);
    assert_eq!(results[1]["ok"], false);
    assert_eq!(results[1]["breakdown"]["total_raw"], 0.0);
    assert_eq!(results[2]["ok"], true);
    assert_eq!(results[2]["breakdown"]["fmt"], 1.0);
    assert!(results[2]["breakdown"]["acc"].as_f64().unwrap() < 1.0);
}

#[test]
fn generate_then_curate_twice_is_byte_identical() {
    let dir = world_dir(200, 50, "");
    let cfg = dir.path().join("config.toml");
    let pool = dir.path().join("pool.lines");
    stdout(&run(&["--config", s(&cfg), "generate", "--out", s(&pool)]));
    assert_eq!(std::fs::read_to_string(&pool).unwrap().lines().count(), 200);
    let a = dir.path().join("a.lines");
    let b = dir.path().join("b.lines");
    let report = dir.path().join("report.json");
    for out in [&a, &b] {
        stdout(&run(&[
            "--config", s(&cfg), "curate", "--pool", s(&pool), "--out", s(out), "--seed", "7", "--report", s(&report),
        ]));
    }
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 50);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["selection"]["selected"], 50);
}

#[test]
fn serve_reports_port_and_answers_health() {
    let mut child = bin()
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut reader = BufReader::new(child.stdout.take().unwrap());
    let mut first = String::new();
    let mut second = String::new();
    reader.read_line(&mut first).unwrap();
    reader.read_line(&mut second).unwrap();
    assert!(first.starts_with("listening on http://127.0.0.1:"), "{first}");
    let port: u16 = second.trim().strip_prefix("ready port=").unwrap().parse().unwrap();
    assert_ne!(port, 0);

    let mut conn = std::net::TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(conn, "GET /v1/health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    conn.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains(r#""status":"ok""#));
}

#[test]
fn evaluate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("eval.json");
    let out = stdout(&run(&[
        "evaluate",
        "--bench",
        s(&fixture("eval/bench.lines")),
        "--preds",
        s(&fixture("eval/preds.lines")),
        "--report",
        s(&report),
    ]));
    let rep: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(rep["total"], 6);
    assert_eq!(rep["correct"], 3);
    assert_eq!(rep["histogram"]["format"]["missing_prediction"], 1);
    assert_eq!(rep["histogram"]["semantic"]["wrong_value"], 1);
    assert_eq!(rep["histogram"]["structural"]["extra_keys"], 1);
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(written, rep);
}

#[test]
fn evaluate_rejects_empty_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.lines");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["evaluate", "--bench", s(&empty), "--preds", s(&fixture("eval/preds.lines"))]);
    assert!(!o.status.success());
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(tree(&p).into_iter().map(|(n, b)| (format!("{}/{n}", p.file_name().unwrap().to_str().unwrap()), b)));
        } else {
            out.push((p.file_name().unwrap().to_str().unwrap().to_string(), std::fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn selfplay_resume_matches_uninterrupted_run() {
    let dir = world_dir(120, 30, "[selfplay]\niterations = 2\ngenerator_batch = 12\n");
    let cfg = dir.path().join("config.toml");
    let clean = dir.path().join("clean");
    let reports = stdout(&run(&["--config", s(&cfg), "selfplay", "--out-dir", s(&clean)]));
    assert_eq!(reports.lines().count(), 2);

    let crashed = dir.path().join("crashed");
    let o = run(&["--config", s(&cfg), "selfplay", "--out-dir", s(&crashed), "--stop-after", "1:verified"]);
    assert!(!o.status.success());
    assert!(!crashed.join("iter_1/dataset.lines").exists());
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(crashed.join("state.json")).unwrap()).unwrap();
    assert_eq!(state["phase"], "dataset_construction");
    let resumed = stdout(&run(&["--config", s(&cfg), "selfplay", "--out-dir", s(&crashed)]));
    assert_eq!(resumed, reports);
    assert_eq!(tree(&crashed), tree(&clean));

    let zero = stdout(&run(&["--config", s(&cfg), "selfplay", "--iterations", "0", "--out-dir", s(&dir.path().join("z"))]));
    assert_eq!(zero, "");
}
