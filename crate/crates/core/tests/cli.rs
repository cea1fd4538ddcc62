mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{dead_url, edited_config, http_section};
use promptrl::synthetic::ExperimentSettings;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_promptrl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn settings(episodes: u64) -> ExperimentSettings {
    ExperimentSettings {
        episodes,
        ..ExperimentSettings::default()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    _dir: tempfile::TempDir,
    config: PathBuf,
    out: PathBuf,
}

fn trained(episodes: u64) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let config = edited_config(dir.path(), "cli", &settings(episodes), |_| {});
    let out = dir.path().join("cli");
    let o = run(&["train", "--config", s(&config)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains(&format!("trained {episodes} episodes")), "{}", stdout(&o));
    Run {
        _dir: dir,
        config,
        out,
    }
}

#[test]
fn train_evaluate_compare_replay() {
    let r = trained(24);
    assert!(r.out.join("train/checkpoint-final.json").exists());

    for policy in ["ppo", "direct", "ga", "rewrite", "random"] {
        let o = run(&["evaluate", "--config", s(&r.config), "--policy", policy]);
        assert_eq!(code(&o), 0, "{policy}: {}", stderr(&o));
        let text = stdout(&o);
        assert!(text.contains("Pass@1") && text.contains("SoftPass@1"), "{text}");
        assert!(r.out.join(format!("eval-{policy}/report.json")).exists());
        assert!(r.out.join(format!("eval-{policy}/traces.jsonl")).exists());
    }
    let explicit = r.out.join("train/checkpoint-final.json");
    let o = run(&["evaluate", "--config", s(&r.config), "--policy", "ppo", "--checkpoint", s(&explicit)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let a = r.out.join("eval-ppo/report.json");
    let b = r.out.join("eval-random/report.json");
    let o = run(&["compare", s(&a), s(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    for row in ["mcnemar p", "cohen's h", "paired t", "cohen's d", "delta pass@1"] {
        assert!(table.contains(row), "{row} missing:\n{table}");
    }
    let o = run(&["compare", s(&a), s(&a), "--json"]);
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["delta_strict"], 0.0);
    assert_eq!(c["mcnemar"]["p_value"], 1.0);

    for trace in [r.out.join("train/traces.jsonl"), r.out.join("eval-random/traces.jsonl")] {
        let o = run(&["replay", s(&trace)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("all match"));
    }
}

#[test]
fn corpus_inspect_reports_counts() {
    let corpus = common::fixtures().join("synthetic/corpus.jsonl");
    let o = run(&["corpus", "inspect", s(&corpus)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["total"], 40);

    let config = common::fixtures().join("synthetic/hermetic.toml");
    let o = run(&["corpus", "inspect", s(&config)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["train"].as_u64(), v["test"].as_u64()), (Some(20), Some(20)));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&run(&["train", "--config", s(&missing)])), 2);

    let bad_key = edited_config(dir.path(), "bad", &settings(1), |t| {
        t.insert("episodez".into(), 3.into());
    });
    let o = run(&["train", "--config", s(&bad_key)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("episodez"), "{}", stderr(&o));

    let bad_path = edited_config(dir.path(), "badpath", &settings(1), |t| {
        t["corpus"].as_table_mut().unwrap().insert("path".into(), "/nonexistent/corpus.jsonl".into());
    });
    assert_eq!(code(&run(&["train", "--config", s(&bad_path)])), 2);

    let ok = edited_config(dir.path(), "ok", &settings(1), |_| {});
    let o = run(&["evaluate", "--config", s(&ok), "--policy", "ppo"]);
    assert_eq!(code(&o), 2, "no checkpoint yet: {}", stderr(&o));
    assert_eq!(code(&run(&["evaluate", "--config", s(&ok), "--policy", "nonsense"])), 2);
}

#[test]
fn incompatible_checkpoint_exits_2() {
    let r = trained(1);
    let dir = tempfile::tempdir().unwrap();
    let other = edited_config(dir.path(), "wide", &settings(1), |t| {
        t["embedder"].as_table_mut().unwrap().insert("dim".into(), 32.into());
    });
    let ck = r.out.join("train/checkpoint-final.json");
    let o = run(&["evaluate", "--config", s(&other), "--policy", "ppo", "--checkpoint", s(&ck)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = run(&["train", "--config", s(&other), "--resume", s(&ck)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn backend_outage_exits_3_and_names_the_resume_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = edited_config(dir.path(), "down", &settings(5), |t| {
        t.insert("generator".into(), http_section(&dead_url()));
    });
    let o = run(&["train", "--config", s(&config)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("checkpoint-halt.json"), "{}", stderr(&o));
    let o = run(&["evaluate", "--config", s(&config), "--policy", "direct"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn evaluation_mismatches_exit_4() {
    let r = trained(1);
    for policy in ["direct", "random"] {
        assert_eq!(code(&run(&["evaluate", "--config", s(&r.config), "--policy", policy])), 0);
    }
    let a = r.out.join("eval-direct/report.json");
    let mut report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    report["records"].as_array_mut().unwrap().pop();
    let trimmed = r.out.join("trimmed.json");
    std::fs::write(&trimmed, report.to_string()).unwrap();
    let o = run(&["compare", s(&trimmed), s(&r.out.join("eval-random/report.json"))]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    // a trace whose recorded reward no longer replays
    let trace = r.out.join("eval-random/traces.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let r0 = lines[0]["reward"].as_f64().unwrap();
    lines[0]["reward"] = (r0 + 0.5).into();
    let body: String = lines.iter().map(|l| l.to_string() + "\n").collect();
    std::fs::write(&trace, body).unwrap();
    let o = run(&["replay", s(&trace)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("mismatch"), "{}", stderr(&o));

    // the run config changed after the trace was written
    let mut cfg = std::fs::read_to_string(&r.config).unwrap();
    cfg.push_str("\n# edited\n");
    std::fs::write(&r.config, cfg).unwrap();
    let o = run(&["replay", s(&r.out.join("eval-direct/traces.jsonl"))]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn auth_token_is_read_only_from_the_named_variable() {
    let server = common::StubServer::start(vec![common::Reply::ok_content("```python\npass\n```")]);
    let dir = tempfile::tempdir().unwrap();
    let config = edited_config(dir.path(), "auth", &settings(1), |t| {
        let mut g = http_section(&server.base_url);
        g.as_table_mut()
            .unwrap()
            .insert("auth_env_var".into(), "PROMPTRL_CLI_TEST_TOKEN".into());
        t.insert("generator".into(), g);
    });
    let o = bin()
        .args(["train", "--config", s(&config)])
        .env_remove("PROMPTRL_CLI_TEST_TOKEN")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(server.connection_count(), 0);

    let o = bin()
        .args(["train", "--config", s(&config)])
        .env("PROMPTRL_CLI_TEST_TOKEN", "tok-123")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recorded = server.recorded();
    assert!(!recorded.is_empty());
    assert!(recorded.iter().all(|r| r.header("authorization") == Some("Bearer tok-123")));
}
