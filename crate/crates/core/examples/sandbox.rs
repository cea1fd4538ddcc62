//! Run the sandbox conformance cases through the in-process fake and, when
//! an interpreter and harness are given, through a child process.
//!
//! `cargo run --example sandbox [INTERPRETER HARNESS]`
//!
//! With no arguments only the fake runs. The test-suite harness works as a
//! stand-in: `sandbox /usr/bin/python3 tests/support/mini_harness.py`.

use std::path::{Path, PathBuf};

use promptrl::sandbox::{run, ChildProcessExecutor, Executor, FakeTable, InProcessFake, SandboxJob};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    code: String,
    tests: Vec<String>,
    entry_point: Option<String>,
    timeout_ms: u64,
}

#[derive(Deserialize)]
struct Conformance {
    fake_table: FakeTable,
    cases: Vec<Case>,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let set: Conformance = serde_json::from_str(&std::fs::read_to_string(root.join("fixtures/sandbox/conformance.json"))?)?;
    let mut executors: Vec<(&str, Box<dyn Executor>)> =
        vec![("fake", Box::new(InProcessFake::new(set.fake_table.rules, set.fake_table.default)))];
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if let [interpreter, harness] = args.as_slice() {
        executors.push(("child", Box::new(ChildProcessExecutor::new(interpreter, harness)?)));
    }
    for c in &set.cases {
        let job = SandboxJob::new(c.code.clone(), c.tests.clone())
            .with_timeout(c.timeout_ms)
            .with_entry_point(c.entry_point.clone());
        for (name, exec) in &executors {
            let v = run(&job, exec.as_ref())?;
            println!("{:<22} {name:<5} {:?} rho={:.2} {:?}", c.name, v.status, v.pass_ratio, v.per_test);
        }
    }
    Ok(())
}
