use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{truncate_diagnostics, Executor, FailureKind, SandboxError, SandboxJob, SandboxVerdict, KILL_GRACE_MS};

/// Upper bound on the harness report we are willing to buffer.
const STDOUT_LIMIT: u64 = 1 << 20;
const POLL: Duration = Duration::from_millis(5);

#[derive(Serialize)]
struct WireJob<'a> {
    code: &'a str,
    tests: &'a [String],
    entry_point: Option<&'a str>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireReport {
    status: String,
    results: Vec<bool>,
    error: String,
}

/// Runs `interpreter harness` once per job, in its own process group.
#[derive(Debug, Clone)]
pub struct ChildProcessExecutor {
    interpreter: PathBuf,
    harness: PathBuf,
}

impl ChildProcessExecutor {
    pub fn new(interpreter: &Path, harness: &Path) -> Result<Self, SandboxError> {
        if !harness.exists() {
            return Err(SandboxError::Config(format!("harness {} not found", harness.display())));
        }
        Ok(Self {
            interpreter: interpreter.to_path_buf(),
            harness: harness.to_path_buf(),
        })
    }

    fn spawn(&self) -> Result<Child, SandboxError> {
        let mut cmd = Command::new(&self.interpreter);
        cmd.arg(&self.harness)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .env_clear()
            .env("PATH", "/usr/bin:/bin");
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        cmd.spawn()
            .map_err(|e| SandboxError::Spawn(format!("{}: {e}", self.interpreter.display())))
    }
}

fn reader<R: Read + Send + 'static>(stream: R, limit: u64) -> JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let mut limited = stream.take(limit);
        let _ = limited.read_to_end(&mut buf);
        // drain the rest so the child never blocks on a full pipe
        let mut rest = limited.into_inner();
        let _ = std::io::copy(&mut rest, &mut std::io::sink());
        buf
    })
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        // the child leads its own group; take any grandchildren with it
        let pgid = child.id() as libc::pid_t;
        unsafe {
            libc::killpg(pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

fn classify(report: &WireReport, tests: usize, stderr: String) -> SandboxVerdict {
    let diag = |extra: &str| {
        let mut d = report.error.clone();
        if !extra.is_empty() {
            if !d.is_empty() {
                d.push('\n');
            }
            d.push_str(extra);
        }
        truncate_diagnostics(d)
    };
    match report.status.as_str() {
        "ok" if report.results.len() == tests => SandboxVerdict::executed(report.results.clone(), diag(&stderr))
            .unwrap_or_else(|_| SandboxVerdict::failure(FailureKind::HarnessError, "empty results")),
        "ok" => SandboxVerdict::failure(
            FailureKind::HarnessError,
            format!("harness returned {} results for {tests} tests", report.results.len()),
        ),
        "syntax_error" => SandboxVerdict::failure(FailureKind::SyntaxError, diag(&stderr)),
        "load_error" => SandboxVerdict::failure(FailureKind::RuntimeCrash, diag(&stderr)),
        other => SandboxVerdict::failure(FailureKind::HarnessError, format!("unknown harness status {other:?}")),
    }
}

impl Executor for ChildProcessExecutor {
    fn run(&self, job: &SandboxJob) -> Result<SandboxVerdict, SandboxError> {
        let payload = serde_json::to_vec(&WireJob {
            code: &job.code,
            tests: &job.tests,
            entry_point: job.entry_point.as_deref(),
        })
        .map_err(|e| SandboxError::Config(e.to_string()))?;

        let mut child = self.spawn()?;
        let mut stdin = child.stdin.take().expect("stdin piped");
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(&payload);
            // dropping stdin closes the pipe
        });
        let out = reader(child.stdout.take().expect("stdout piped"), STDOUT_LIMIT);
        let err = reader(child.stderr.take().expect("stderr piped"), super::DIAGNOSTICS_LIMIT as u64);

        let deadline = Instant::now() + Duration::from_millis(job.timeout_ms + KILL_GRACE_MS);
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => break None,
                Ok(None) => std::thread::sleep(POLL),
                Err(e) => {
                    kill_tree(&mut child);
                    let _ = child.wait();
                    return Err(SandboxError::Spawn(format!("wait failed: {e}")));
                }
            }
        };
        let timed_out = status.is_none();
        // reap stragglers in the group even after a clean exit
        kill_tree(&mut child);
        let status = match status {
            Some(s) => s,
            None => child.wait().map_err(|e| SandboxError::Spawn(format!("reap failed: {e}")))?,
        };
        let _ = writer.join();
        let stdout = out.join().unwrap_or_default();
        let stderr = String::from_utf8_lossy(&err.join().unwrap_or_default()).into_owned();

        if timed_out {
            return Ok(SandboxVerdict::failure(
                FailureKind::Timeout,
                format!("killed after {} ms", job.timeout_ms + KILL_GRACE_MS),
            ));
        }
        if !status.success() {
            return Ok(SandboxVerdict::failure(
                FailureKind::HarnessError,
                truncate_diagnostics(format!("harness exited with {status}\n{stderr}")),
            ));
        }
        let report: WireReport = match serde_json::from_slice(stdout.trim_ascii()) {
            Ok(r) => r,
            Err(e) => {
                return Ok(SandboxVerdict::failure(
                    FailureKind::HarnessError,
                    truncate_diagnostics(format!("malformed harness output: {e}")),
                ))
            }
        };
        Ok(classify(&report, job.tests.len(), stderr))
    }
}
