use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use litnav_core::agent::{LlmProvider, Prompt, PromptMessage, ProviderError, ResponseFormat, Role, Task};
use litnav_core::embed::{EmbedError, EmbeddingProvider};
use litnav_service::remote::{RemoteEmbedder, RemoteLlm, MAX_ATTEMPTS};
use serde_json::{json, Value};

/// Replays queued (status, body) pairs; the last one repeats forever.
#[derive(Default)]
struct Mock {
    replies: Mutex<VecDeque<(u16, Value)>>,
    requests: Mutex<Vec<(Option<String>, Value)>>,
}

impl Mock {
    fn hits(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

async fn respond(State(mock): State<Arc<Mock>>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).map(str::to_string);
    mock.requests.lock().unwrap().push((auth, body));
    let mut replies = mock.replies.lock().unwrap();
    let (status, body) = if replies.len() > 1 { replies.pop_front().unwrap() } else { replies[0].clone() };
    (StatusCode::from_u16(status).unwrap(), Json(body))
}

fn mock(replies: Vec<(u16, Value)>) -> (String, Arc<Mock>) {
    let state = Arc::new(Mock { replies: Mutex::new(replies.into()), ..Mock::default() });
    let app = Router::new().route("/", post(respond)).with_state(state.clone());
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{addr}/"), state)
}

fn prompt() -> Prompt {
    Prompt { task: Task::Draft, messages: vec![PromptMessage { role: Role::User, content: "llm in healthcare".into() }] }
}

fn llm(url: &str) -> RemoteLlm {
    RemoteLlm::new(url, Some("secret".into())).with_backoff(Duration::from_millis(5))
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, state) = mock(vec![(500, json!({})), (503, json!({})), (200, json!({ "text": "TS=(llm)" }))]);
    let text = llm(&url).complete(&prompt(), &ResponseFormat::Text).unwrap();
    assert_eq!(text, "TS=(llm)");
    assert_eq!(state.hits(), 3);
    let requests = state.requests.lock().unwrap();
    let (auth, body) = &requests[2];
    assert_eq!(auth.as_deref(), Some("Bearer secret"));
    assert_eq!(body["task"], "draft");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "llm in healthcare");
    assert_eq!(body["response_format"]["type"], "text");
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, state) = mock(vec![(500, json!({ "oops": true }))]);
    let err = llm(&url).complete(&prompt(), &ResponseFormat::Text).unwrap_err();
    assert!(matches!(err, ProviderError::BadResponse(ref m) if m.contains("500")), "{err:?}");
    assert_eq!(state.hits(), MAX_ATTEMPTS as usize);

    let (url, state) = mock(vec![(429, json!({}))]);
    llm(&url).complete(&prompt(), &ResponseFormat::Text).unwrap_err();
    assert_eq!(state.hits(), MAX_ATTEMPTS as usize);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, state) = mock(vec![(400, json!({ "error": "bad" })), (200, json!({ "text": "never" }))]);
    let err = llm(&url).complete(&prompt(), &ResponseFormat::Text).unwrap_err();
    assert!(matches!(err, ProviderError::BadResponse(_)));
    assert_eq!(state.hits(), 1);
}

#[test]
fn malformed_body_is_bad_response() {
    let (url, _) = mock(vec![(200, json!({ "answer": "x" }))]);
    let err = llm(&url).complete(&prompt(), &ResponseFormat::Text).unwrap_err();
    assert!(matches!(err, ProviderError::BadResponse(_)));
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let err = llm(&url).complete(&prompt(), &ResponseFormat::Text).unwrap_err();
    assert!(matches!(err, ProviderError::Transport(_)), "{err:?}");
}

#[test]
fn embedder_normalizes_and_learns_dimension() {
    let (url, state) = mock(vec![(200, json!({ "vectors": [[3.0, 4.0], [0.0, 2.0]] }))]);
    let embedder = RemoteEmbedder::new(&url, None).with_backoff(Duration::from_millis(5));
    assert_eq!(embedder.dimension(), 0);
    let texts = vec!["a".to_string(), "b".to_string()];
    let vectors = embedder.embed_batch(&texts).unwrap();
    assert_eq!(vectors[0].as_slice(), &[0.6, 0.8]);
    assert_eq!(vectors[1].as_slice(), &[0.0, 1.0]);
    assert_eq!(embedder.dimension(), 2);
    let requests = state.requests.lock().unwrap();
    assert_eq!(requests[0].0, None);
    assert_eq!(requests[0].1, json!({ "texts": ["a", "b"] }));
}

#[test]
fn embedder_rejects_bad_replies() {
    let texts = vec!["a".to_string(), "b".to_string()];
    let (url, _) = mock(vec![(200, json!({ "vectors": [[1.0, 0.0]] }))]);
    let err = RemoteEmbedder::new(&url, None).embed_batch(&texts).unwrap_err();
    assert!(matches!(err, EmbedError::Provider(_)));

    let (url, _) = mock(vec![(200, json!({ "vectors": [[1.0, 0.0], [1.0]] }))]);
    let err = RemoteEmbedder::new(&url, None).embed_batch(&texts).unwrap_err();
    assert_eq!(err, EmbedError::DimensionMismatch { expected: 2, found: 1 });

    let (url, state) = mock(vec![(200, json!({ "vectors": [[1.0]] }))]);
    let err = RemoteEmbedder::new(&url, None).embed_batch(&["  ".to_string()]).unwrap_err();
    assert_eq!(err, EmbedError::EmptyText);
    assert_eq!(state.hits(), 0);
}
