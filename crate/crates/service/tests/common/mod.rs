#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use litnav_core::agent::{
    Assets, LlmProvider, Prompt, ProviderError, ResponseFormat, Script, ScriptedProvider, StepClock, Task,
};
use litnav_core::embed::StubEmbedder;
use litnav_core::mining::MiningParams;
use litnav_service::{router, AppState, Parts, ServiceConfig};
use serde_json::{json, Value};

pub fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/ai4health.jsonl")
}

pub fn script() -> Script {
    let q = |s: &str| json!({ "query": s }).to_string();
    Script::default()
        .rule(Task::Draft, Some("healthcare"), q(r#"TS=("large language model*" OR llm*) AND TS=(healthcare OR clinical)"#))
        .rule(
            Task::Refine,
            Some("mental health"),
            q(r#"TS=("large language model*" OR llm* OR "mental health") AND TS=(healthcare OR clinical OR "mental health")"#),
        )
        .rule(Task::SelectTools, Some("what topics"), r#"[{"tool":"fit_topics","params":{}}]"#)
        .rule(Task::SelectTools, Some("topic 1"), r#"[{"tool":"topic","params":{"topic_id":1}}]"#)
        .rule(Task::SelectTools, Some("trend"), r#"[{"tool":"topic_trend","params":{"topic_id":0}}]"#)
}

pub const DRAFT: &str = "what healthcare tasks have LLMs been used for";
pub const REFINE: &str = "please also include mental health";

/// Sleeps before every completion so concurrent requests overlap.
pub struct Slow(pub Arc<dyn LlmProvider>, pub Duration);

impl LlmProvider for Slow {
    fn complete(&self, prompt: &Prompt, format: &ResponseFormat) -> Result<String, ProviderError> {
        std::thread::sleep(self.1);
        self.0.complete(prompt, format)
    }

    fn name(&self) -> &str {
        "slow"
    }
}

pub fn config(data_dir: &Path) -> ServiceConfig {
    ServiceConfig { corpus: vec![fixture()], data_dir: data_dir.to_path_buf(), ..ServiceConfig::default() }
}

pub fn parts(provider: Arc<dyn LlmProvider>) -> Parts {
    Parts {
        provider,
        embedder: Arc::new(StubEmbedder),
        clock: Arc::new(StepClock::new(1_700_000_000_000, 1_000)),
        assets: Arc::new(Assets::builtin()),
        params: MiningParams::default(),
    }
}

pub fn scripted() -> Arc<dyn LlmProvider> {
    Arc::new(ScriptedProvider::new(script()))
}

pub struct Server {
    pub base: String,
    pub app: Arc<AppState>,
    pub http: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn start_with(config: ServiceConfig, provider: Arc<dyn LlmProvider>) -> Server {
    let app = AppState::open(config, parts(provider)).expect("service starts");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let service = router(app.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, service).await.unwrap();
    });
    Server { base, app, http: reqwest::Client::new(), task }
}

pub async fn start(data_dir: &Path) -> Server {
    start_with(config(data_dir), scripted()).await
}

impl Server {
    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let resp = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post_raw(&self, path: &str, body: String) -> (u16, Value) {
        let resp = self.http.post(format!("{}{path}", self.base)).body(body).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn create(&self) -> String {
        let (status, body) = self.post_raw("/api/sessions", String::new()).await;
        assert_eq!(status, 200, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    pub async fn say(&self, id: &str, text: &str) -> Value {
        let (status, body) = self.post(&format!("/api/sessions/{id}/messages"), json!({ "text": text })).await;
        assert_eq!(status, 200, "{body}");
        body
    }

    /// Drafts, refines and approves; returns the approval reply.
    pub async fn ready_session(&self) -> (String, Value) {
        let id = self.create().await;
        self.say(&id, DRAFT).await;
        self.say(&id, REFINE).await;
        let (status, body) = self.post(&format!("/api/sessions/{id}/approve"), Value::Null).await;
        assert_eq!(status, 200, "{body}");
        assert_eq!(body["state"], "Ready", "{body}");
        (id, body)
    }
}

pub fn texts(reply: &Value) -> Vec<String> {
    reply["messages"].as_array().unwrap().iter().map(|m| m["text"].as_str().unwrap().to_string()).collect()
}
