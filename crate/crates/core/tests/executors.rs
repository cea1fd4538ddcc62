mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use promptrl::sandbox::{
    run, ChildProcessExecutor, Executor, ExecutorConfig, FailureKind, FakeTable, InProcessFake, SandboxJob, Status,
};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    code: String,
    tests: Vec<String>,
    entry_point: Option<String>,
    timeout_ms: u64,
    expected: Status,
    per_test: Option<Vec<bool>>,
}

#[derive(Deserialize)]
struct Conformance {
    fake_table: FakeTable,
    cases: Vec<Case>,
}

fn conformance() -> Conformance {
    let text = std::fs::read_to_string(common::fixtures().join("sandbox/conformance.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn job(c: &Case) -> SandboxJob {
    SandboxJob::new(c.code.clone(), c.tests.clone())
        .with_timeout(c.timeout_ms)
        .with_entry_point(c.entry_point.clone())
}

fn python() -> Option<PathBuf> {
    ["/usr/bin/python3", "/usr/local/bin/python3"]
        .into_iter()
        .map(PathBuf::from)
        .find(|p| p.exists())
}

fn mini_harness() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/support/mini_harness.py")
}

fn check_case(exec: &dyn Executor, c: &Case) {
    let v = run(&job(c), exec).unwrap();
    assert_eq!(v.status, c.expected, "{}: {}", c.name, v.diagnostics);
    assert_eq!(v.per_test, c.per_test, "{}", c.name);
    let expected_rho = c
        .per_test
        .as_ref()
        .map_or(0.0, |r| r.iter().filter(|b| **b).count() as f64 / r.len() as f64);
    assert_eq!(v.pass_ratio, expected_rho, "{}", c.name);
}

#[test]
fn fake_passes_the_conformance_set() {
    let set = conformance();
    let fake = InProcessFake::new(set.fake_table.rules.clone(), set.fake_table.default.clone());
    for c in &set.cases {
        check_case(&fake, c);
    }
    let partial = set.cases.iter().find(|c| c.name == "partial_two_of_three").unwrap();
    let v = run(&job(partial), &fake).unwrap();
    assert_eq!(format!("{:.2}", v.pass_ratio), "0.67");
}

#[test]
fn child_process_matches_the_fake_on_the_conformance_set() {
    let Some(py) = python() else {
        eprintln!("python3 not found; skipping child-process conformance");
        return;
    };
    let set = conformance();
    let fake = InProcessFake::new(set.fake_table.rules.clone(), set.fake_table.default.clone());
    let child = ChildProcessExecutor::new(&py, &mini_harness()).unwrap();
    for c in &set.cases {
        let start = Instant::now();
        let a = run(&job(c), &child).unwrap();
        let b = run(&job(c), &fake).unwrap();
        assert_eq!((a.status, &a.per_test), (b.status, &b.per_test), "{}: {}", c.name, a.diagnostics);
        assert_eq!(a.pass_ratio.to_bits(), b.pass_ratio.to_bits(), "{}", c.name);
        if c.expected == Status::ExecutionFailure(FailureKind::Timeout) {
            let limit = Duration::from_millis(c.timeout_ms + promptrl::sandbox::KILL_GRACE_MS + 1_000);
            assert!(start.elapsed() < limit, "{}: took {:?}", c.name, start.elapsed());
        }
    }
}

/// Shell script standing in for the harness.
fn sh_harness(dir: &Path, name: &str, body: &str) -> ChildProcessExecutor {
    let path = dir.join(name);
    std::fs::write(&path, format!("cat > /dev/null\n{body}\n")).unwrap();
    ChildProcessExecutor::new(Path::new("/bin/sh"), &path).unwrap()
}

fn simple_job(tests: usize) -> SandboxJob {
    SandboxJob::new("def f():\n    return 1\n", (0..tests).map(|i| format!("assert f() == {i}")).collect()).with_timeout(2_000)
}

#[test]
fn harness_reports_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"echo '{"status": "ok", "results": [true, false, true], "error": ""}'"#, Status::Executed),
        (
            r#"echo '{"status": "syntax_error", "results": [], "error": "bad"}'"#,
            Status::ExecutionFailure(FailureKind::SyntaxError),
        ),
        (
            r#"echo '{"status": "load_error", "results": [], "error": "boom"}'"#,
            Status::ExecutionFailure(FailureKind::RuntimeCrash),
        ),
        (
            r#"echo '{"status": "ok", "results": [true], "error": ""}'"#,
            Status::ExecutionFailure(FailureKind::HarnessError),
        ),
        (
            r#"echo '{"status": "weird", "results": [], "error": ""}'"#,
            Status::ExecutionFailure(FailureKind::HarnessError),
        ),
        (r#"echo 'not json'"#, Status::ExecutionFailure(FailureKind::HarnessError)),
        (
            r#"echo '{"status": "ok", "results": [true, true, true], "error": ""}'; echo extra"#,
            Status::ExecutionFailure(FailureKind::HarnessError),
        ),
        (
            r#"echo '{"status": "ok", "results": [true, true, true], "error": "", "bonus": 1}'"#,
            Status::ExecutionFailure(FailureKind::HarnessError),
        ),
        (
            r#"echo '{"status": "ok", "results": [true, true, true], "error": ""}'; exit 3"#,
            Status::ExecutionFailure(FailureKind::HarnessError),
        ),
        ("exit 0", Status::ExecutionFailure(FailureKind::HarnessError)),
    ];
    for (i, (body, expected)) in cases.iter().enumerate() {
        let exec = sh_harness(dir.path(), &format!("h{i}.sh"), body);
        let v = exec.run(&simple_job(3)).unwrap();
        assert_eq!(v.status, *expected, "{body}: {}", v.diagnostics);
        if *expected == Status::Executed {
            assert_eq!(v.per_test, Some(vec![true, false, true]));
            assert_eq!(v.pass_ratio, 2.0 / 3.0);
        } else {
            assert_eq!(v.per_test, None);
            assert_eq!(v.pass_ratio, 0.0);
        }
    }
}

#[test]
fn job_is_written_to_stdin_as_one_json_object() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("job.json");
    let script = dir.path().join("echo.sh");
    std::fs::write(
        &script,
        format!(
            "cat > {}\necho '{{\"status\": \"ok\", \"results\": [true], \"error\": \"\"}}'\n",
            capture.display()
        ),
    )
    .unwrap();
    let exec = ChildProcessExecutor::new(Path::new("/bin/sh"), &script).unwrap();
    let job = SandboxJob::new("print('hi')", vec!["assert True".into()]).with_entry_point(Some("main".into()));
    exec.run(&job).unwrap();
    let sent: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&capture).unwrap()).unwrap();
    assert_eq!(sent, serde_json::json!({"code": "print('hi')", "tests": ["assert True"], "entry_point": "main"}));
}

fn live_processes_with(marker: &str) -> usize {
    let mut n = 0;
    for entry in std::fs::read_dir("/proc").unwrap().flatten() {
        if let Ok(cmdline) = std::fs::read(entry.path().join("cmdline")) {
            let s = String::from_utf8_lossy(&cmdline).replace('\0', " ");
            if s.contains(marker) {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn timeouts_kill_the_whole_process_group() {
    if !Path::new("/proc/self/cmdline").exists() {
        eprintln!("no /proc; skipping leak check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    // unusual duration doubles as a marker in the process table
    let marker = "37.4242";
    let exec = sh_harness(dir.path(), "hang.sh", &format!("sleep {marker} &\nsleep {marker}"));
    let start = Instant::now();
    let v = exec.run(&simple_job(1).with_timeout(100)).unwrap();
    assert_eq!(v.status, Status::ExecutionFailure(FailureKind::Timeout));
    assert!(start.elapsed() < Duration::from_secs(3), "{:?}", start.elapsed());
    std::thread::sleep(Duration::from_millis(100));
    assert_eq!(live_processes_with(marker), 0, "child or grandchild survived the kill");
}

#[test]
fn clean_exits_leave_no_stragglers() {
    if !Path::new("/proc/self/cmdline").exists() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let marker = "41.3131";
    let exec = sh_harness(
        dir.path(),
        "fork.sh",
        &format!("sleep {marker} > /dev/null 2>&1 &\necho '{{\"status\": \"ok\", \"results\": [true], \"error\": \"\"}}'"),
    );
    let v = exec.run(&simple_job(1)).unwrap();
    assert_eq!(v.status, Status::Executed);
    std::thread::sleep(Duration::from_millis(100));
    assert_eq!(live_processes_with(marker), 0);
}

#[test]
fn chatty_stderr_does_not_block_the_child() {
    let dir = tempfile::tempdir().unwrap();
    let exec = sh_harness(
        dir.path(),
        "noisy.sh",
        r#"head -c 2000000 /dev/zero | tr '\0' 'x' >&2
echo '{"status": "ok", "results": [true], "error": ""}'"#,
    );
    let v = exec.run(&simple_job(1)).unwrap();
    assert_eq!(v.status, Status::Executed);
    assert!(v.diagnostics.len() <= promptrl::sandbox::DIAGNOSTICS_LIMIT + 64);
}

#[test]
fn missing_harness_is_a_config_error() {
    assert!(ChildProcessExecutor::new(Path::new("/bin/sh"), Path::new("/nonexistent/harness.py")).is_err());
    let cfg: ExecutorConfig = serde_json::from_value(serde_json::json!({
        "kind": "child_process",
        "interpreter_path": "/bin/sh",
        "harness_path": "/nonexistent/harness.py"
    }))
    .unwrap();
    assert!(cfg.build().is_err());
}

#[test]
fn executor_config_round_trips() {
    let rules = common::fixtures().join("synthetic/sandbox_rules.json");
    let cfg: ExecutorConfig =
        serde_json::from_value(serde_json::json!({"kind": "in_process_fake", "rules_path": rules})).unwrap();
    let exec = cfg.build().unwrap();
    let v = exec.run(&simple_job(2)).unwrap();
    assert_eq!(v.status, Status::Executed);
}
