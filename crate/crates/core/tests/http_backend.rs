mod common;

use std::time::{Duration, Instant};

use common::{dead_url, Reply, StubServer};
use promptrl::gateway::{Backend, BackendConfig, BackendKind, DecodingParams, GatewayError, GenRequest, Role, TextBackend};

fn config(base_url: &str, auth_env_var: Option<&str>, timeout_ms: u64, retry_limit: u32) -> BackendConfig {
    BackendConfig {
        kind: BackendKind::HttpEndpoint {
            base_url: base_url.to_string(),
            model_name: "stub-coder".into(),
            auth_env_var: auth_env_var.map(str::to_string),
        },
        timeout_ms,
        retry_limit,
    }
}

fn request() -> GenRequest {
    GenRequest::new(Role::CodeGenerator, "Write a function that adds two numbers.", DecodingParams::default(), 42)
}

#[test]
fn sends_chat_completion_and_returns_content() {
    let server = StubServer::start(vec![Reply::ok_content("```python\ndef add(a, b):\n    return a + b\n```")]);
    let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 0)).unwrap();
    let resp = backend.generate(&request()).unwrap();
    assert!(resp.raw_text.contains("return a + b"));
    assert_eq!(resp.backend_id, "http:stub-coder");

    let recorded = server.recorded();
    assert_eq!(recorded.len(), 1);
    assert_eq!(recorded[0].request_line, "POST /v1/chat/completions HTTP/1.1");
    assert!(recorded[0].header("authorization").is_none());
    let body: serde_json::Value = serde_json::from_str(&recorded[0].body).unwrap();
    assert_eq!(body["model"], "stub-coder");
    assert_eq!(body["seed"], 42);
    assert_eq!(body["max_tokens"], 512);
    assert_eq!(body["temperature"], 0.8);
    assert_eq!(body["top_p"], 0.95);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "Write a function that adds two numbers.");
}

#[test]
fn bearer_token_comes_from_the_named_variable() {
    const VAR: &str = "PROMPTRL_TEST_TOKEN_BEARER";
    std::env::set_var(VAR, "s3cret");
    let server = StubServer::start(vec![Reply::ok_content("ok")]);
    let backend = Backend::from_config(&config(&server.base_url, Some(VAR), 5_000, 0)).unwrap();
    backend.generate(&request()).unwrap();
    assert_eq!(server.recorded()[0].header("authorization"), Some("Bearer s3cret"));
}

#[test]
fn missing_token_variable_fails_before_any_request() {
    let server = StubServer::start(vec![Reply::ok_content("ok")]);
    let backend = Backend::from_config(&config(&server.base_url, Some("PROMPTRL_TEST_TOKEN_UNSET"), 5_000, 3)).unwrap();
    let err = backend.generate(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::AuthMissing(ref v) if v == "PROMPTRL_TEST_TOKEN_UNSET"), "{err}");
    assert_eq!(server.connection_count(), 0);
}

#[test]
fn transient_statuses_are_retried() {
    let server = StubServer::start(vec![
        Reply::raw(503, "busy"),
        Reply::raw(429, "slow down"),
        Reply::ok_content("third time"),
    ]);
    let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 2)).unwrap();
    assert_eq!(backend.generate(&request()).unwrap().raw_text, "third time");
    assert_eq!(server.recorded().len(), 3);
}

#[test]
fn retries_are_bounded() {
    let server = StubServer::start(vec![Reply::raw(500, "down")]);
    let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 2)).unwrap();
    let err = backend.generate(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::BackendUnavailable { attempts: 3, .. }), "{err}");
    assert_eq!(server.recorded().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = StubServer::start(vec![Reply::raw(400, "{}")]);
    let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 4)).unwrap();
    assert!(matches!(backend.generate(&request()), Err(GatewayError::BadResponse(_))));
    assert_eq!(server.recorded().len(), 1);

    let server = StubServer::start(vec![Reply::raw(401, "{}")]);
    let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 4)).unwrap();
    assert!(matches!(backend.generate(&request()), Err(GatewayError::BackendUnavailable { .. })));
    assert_eq!(server.recorded().len(), 1);
}

#[test]
fn malformed_bodies_are_rejected() {
    for body in ["not json", r#"{"choices": []}"#, r#"{"choices": [{"message": {"content": null}}]}"#] {
        let server = StubServer::start(vec![Reply::raw(200, body)]);
        let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 2)).unwrap();
        let err = backend.generate(&request()).unwrap_err();
        assert!(matches!(err, GatewayError::BadResponse(_)), "{body}: {err}");
        assert_eq!(server.recorded().len(), 1, "{body}");
    }
}

#[test]
fn slow_responses_time_out() {
    let server = StubServer::start(vec![Reply::ok_content("late").delayed(Duration::from_millis(1_500))]);
    let backend = Backend::from_config(&config(&server.base_url, None, 200, 1)).unwrap();
    let start = Instant::now();
    let err = backend.generate(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::BackendTimeout { attempts: 2 }), "{err}");
    assert!(start.elapsed() < Duration::from_millis(1_400));
}

#[test]
fn refused_connections_count_as_unavailable() {
    let backend = Backend::from_config(&config(&dead_url(), None, 1_000, 1)).unwrap();
    assert!(matches!(
        backend.generate(&request()),
        Err(GatewayError::BackendUnavailable { attempts: 2, .. })
    ));
}

#[test]
fn invalid_requests_never_reach_the_network() {
    let server = StubServer::start(vec![Reply::ok_content("ok")]);
    let backend = Backend::from_config(&config(&server.base_url, None, 5_000, 0)).unwrap();
    let mut req = request();
    req.prompt = "   ".into();
    assert!(matches!(backend.generate(&req), Err(GatewayError::InvalidRequest(_))));
    let mut req = request();
    req.decoding.top_p = 0.0;
    assert!(matches!(backend.generate(&req), Err(GatewayError::InvalidRequest(_))));
    assert_eq!(server.connection_count(), 0);
}
