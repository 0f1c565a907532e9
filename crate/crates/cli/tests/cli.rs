use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;
use star_core::config::BenchConfig;
use star_core::metrics::RunReport;
use star_core::runner::{build_registry, run_strategy, PlannerSpec};
use star_core::scheduler::Strategy;
use star_core::suite::Suite;
use star_core::trace::read_trace;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_star-bench")).args(args).output().expect("run star-bench")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, seed: &str, n: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let o = bench(&["generate", "--seed", seed, "-n", n, "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json", "7", "20");
    let b = generate(dir.path(), "b.json", "7", "20");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(Suite::load(&a).unwrap().questions.len(), 20);
}

#[test]
fn empty_suite_runs_without_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let suite = generate(dir.path(), "empty.json", "0", "0");
    assert!(Suite::load(&suite).unwrap().questions.is_empty());
    let out = dir.path().join("out");
    let o = bench(&["run", "--suite", s(&suite), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read_trace(&out.join("star.jsonl")).unwrap().is_empty());
}

#[test]
fn bad_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("bad.toml");
    std::fs::write(&profile, "n_options = 1\n").unwrap();
    let o = bench(&["generate", "-n", "3", "--profile", s(&profile), "--out", s(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(2));

    let suite = generate(dir.path(), "s.json", "0", "3");
    let out = s(dir.path());
    let o = bench(&["run", "--suite", s(&suite), "--strategy", "telepathy", "-o", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("telepathy"));

    let o = bench(&["run", "--suite", s(&suite), "--disable-tool", "warp_drive", "-o", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warp_drive"));

    let o = bench(&["run", "--suite", s(&dir.path().join("missing.json")), "-o", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = bench(&["run", "--suite", s(&suite), "--noise", "p_miss=7", "-o", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreachable_tool_server_fails_the_handshake() {
    let dir = tempfile::tempdir().unwrap();
    let suite = generate(dir.path(), "s.json", "0", "2");
    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "[tools]\nremote_endpoint = \"http://127.0.0.1:9\"\nremote_timeout_ms = 500\n").unwrap();
    let o = bench(&["run", "--suite", s(&suite), "--config", s(&cfg), "-o", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let suite_path = generate(dir.path(), "s.json", "3", "30");
    let out = dir.path().join("out");
    let o = bench(&["run", "--suite", s(&suite_path), "--strategy", "all", "--workers", "4", "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let suite = Suite::load(&suite_path).unwrap();
    let config = BenchConfig::default();
    let reg = build_registry(&config).unwrap();
    for strategy in Strategy::ALL {
        let lib = run_strategy(&suite, &reg, &PlannerSpec::Heuristic, &config, strategy, 1);
        let file = read_trace(&out.join(format!("{}.jsonl", strategy.as_str()))).unwrap();
        let a: Vec<_> = lib.traces.iter().map(|t| t.without_timing()).collect();
        let b: Vec<_> = file.iter().map(|t| t.without_timing()).collect();
        assert_eq!(a, b, "{strategy}");
        let report: RunReport =
            serde_json::from_str(&std::fs::read_to_string(out.join(format!("{}.report.json", strategy.as_str()))).unwrap()).unwrap();
        assert_eq!(report.accuracy, lib.report.accuracy);
        assert_eq!(report.mean_frames, lib.report.mean_frames);
    }

    let r = bench(&["report", s(&out.join("star.jsonl")), "--json"]);
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("\"accuracy\""));
}

#[test]
fn scripted_planner_follows_its_script() {
    let dir = tempfile::tempdir().unwrap();
    let suite = generate(dir.path(), "s.json", "1", "3");
    let script = dir.path().join("script.json");
    let body = json!({
        "decisions": [
            {"kind": "invoke_tool", "tool_name": "frame_selector", "tool_args": {}},
            {"kind": "invoke_tool", "tool_name": "image_captioner", "tool_args": {}},
            {"kind": "invoke_tool", "tool_name": "text_summarizer", "tool_args": {}}
        ],
        "answer": 0
    });
    std::fs::write(&script, body.to_string()).unwrap();
    let out = dir.path().join("out");
    let planner = format!("scripted:{}", s(&script));
    let o = bench(&["run", "--suite", s(&suite), "--planner", &planner, "--max-iterations", "1", "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traces = read_trace(&out.join("star.jsonl")).unwrap();
    assert_eq!(traces.len(), 3);
    for t in &traces {
        assert_eq!(t.planner, "scripted");
        assert_eq!(t.tool_names().collect::<Vec<_>>(), ["frame_selector", "image_captioner", "text_summarizer"]);
        assert_eq!(t.final_answer, Some(0));
    }
}

#[test]
fn ablate_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let suite = generate(dir.path(), "s.json", "0", "20");
    let out = dir.path().join("ablation.json");
    let o = bench(&["ablate", "--suite", s(&suite), "--disable-tool", "frame_selector", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("accuracy drop"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["disabled"], json!(["frame_selector"]));
    let o = bench(&["ablate", "--suite", s(&suite)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cards_prints_the_toolkit() {
    let o = bench(&["cards"]);
    assert!(o.status.success());
    let cards: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cards.len(), 22);
}
