#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use promptrl::run::{load_config, LoadedConfig};
use promptrl::synthetic::{run_config_toml, ExperimentSettings};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Write a synthetic-curriculum config into `dir` and load it.
pub fn synthetic_config(dir: &Path, name: &str, s: &ExperimentSettings) -> LoadedConfig {
    let path = dir.join(format!("{name}.toml"));
    let body = run_config_toml(&fixtures().join("synthetic"), &dir.join(name), s);
    std::fs::write(&path, body).unwrap();
    load_config(&path).unwrap()
}

/// Same as [`synthetic_config`] but with `edit` applied to the parsed TOML
/// first. Returns the config path.
pub fn edited_config(dir: &Path, name: &str, s: &ExperimentSettings, edit: impl Fn(&mut toml::Table)) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let body = run_config_toml(&fixtures().join("synthetic"), &dir.join(name), s);
    let mut table: toml::Table = body.parse().unwrap();
    edit(&mut table);
    std::fs::write(&path, toml::to_string(&table).unwrap()).unwrap();
    path
}

/// A generator or rewriter section pointing at an HTTP endpoint.
pub fn http_section(base_url: &str) -> toml::Value {
    let mut t = toml::Table::new();
    t.insert("kind".into(), "http_endpoint".into());
    t.insert("base_url".into(), base_url.into());
    t.insert("model_name".into(), "stub".into());
    t.insert("retry_limit".into(), 0.into());
    t.insert("timeout_ms".into(), 2_000.into());
    toml::Value::Table(t)
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub request_line: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Recorded {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn ok_content(content: &str) -> Self {
        let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]});
        Self::raw(200, &body.to_string())
    }

    pub fn raw(status: u16, body: &str) -> Self {
        Self {
            status,
            body: body.to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, d: Duration) -> Self {
        self.delay = d;
        self
    }
}

/// One-connection-per-request HTTP stub. Replies are served in order; the
/// last one repeats once the script runs out.
pub struct StubServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
    pub connections: Arc<Mutex<usize>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Recorded> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let mut headers = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let len: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some(Recorded {
        request_line: request_line.trim_end().to_string(),
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    })
}

impl StubServer {
    pub fn start(replies: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let connections = Arc::new(Mutex::new(0));
        let (reqs, conns) = (requests.clone(), connections.clone());
        std::thread::spawn(move || {
            let mut served = 0usize;
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                *conns.lock().unwrap() += 1;
                let Some(rec) = read_request(&mut stream) else { continue };
                reqs.lock().unwrap().push(rec);
                let reply = replies[served.min(replies.len() - 1)].clone();
                served += 1;
                std::thread::sleep(reply.delay);
                let head = format!(
                    "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    reply.status,
                    reply.body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(reply.body.as_bytes());
                let _ = stream.flush();
            }
        });
        Self {
            base_url,
            requests,
            connections,
        }
    }

    pub fn recorded(&self) -> Vec<Recorded> {
        self.requests.lock().unwrap().clone()
    }

    pub fn connection_count(&self) -> usize {
        *self.connections.lock().unwrap()
    }
}

/// Listening port that nobody serves; returns the address as a base URL.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/v1")
}
