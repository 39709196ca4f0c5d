//! HTTP adapters for an external language model and embedding model.
//!
//! Both speak small JSON contracts:
//! `POST {messages, response_format, task} -> {text}` and
//! `POST {texts} -> {vectors}`. Transport failures, 429 and 5xx responses
//! are retried with exponential backoff, at most [`MAX_ATTEMPTS`] times.

use std::sync::OnceLock;
use std::time::Duration;

use litnav_core::agent::{LlmProvider, Prompt, ProviderError, ResponseFormat};
use litnav_core::embed::{EmbedError, EmbeddingProvider, EmbeddingVector};
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug)]
enum CallError {
    Transport(String),
    Status(u16, String),
    Decode(String),
}

impl CallError {
    fn message(self) -> String {
        match self {
            CallError::Transport(m) | CallError::Decode(m) => m,
            CallError::Status(code, body) => format!("status {code}: {body}"),
        }
    }
}

/// Shared POST-with-retry plumbing. The blocking client is created on first
/// use so that constructing an adapter inside an async runtime is safe.
#[derive(Debug)]
struct Endpoint {
    url: String,
    key: Option<String>,
    backoff: Duration,
    client: OnceLock<Client>,
}

impl Endpoint {
    fn new(url: &str, key: Option<String>) -> Endpoint {
        Endpoint { url: url.to_string(), key, backoff: Duration::from_millis(200), client: OnceLock::new() }
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, body: &B) -> Result<R, CallError> {
        let client = self.client.get_or_init(|| {
            Client::builder().timeout(Duration::from_secs(120)).build().expect("http client configuration is static")
        });
        let mut last = CallError::Transport("no attempt made".into());
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let mut request = client.post(&self.url).json(body);
            if let Some(key) = &self.key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Err(e) => last = CallError::Transport(e.to_string()),
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<R>().map_err(|e| CallError::Decode(e.to_string()));
                    }
                    let text = resp.text().unwrap_or_default();
                    last = CallError::Status(status.as_u16(), text);
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(last);
                    }
                }
            }
            tracing::warn!(url = %self.url, attempt = attempt + 1, "remote call failed");
        }
        Err(last)
    }
}

#[derive(Serialize)]
struct CompleteRequest<'a> {
    task: litnav_core::agent::Task,
    messages: &'a [litnav_core::agent::PromptMessage],
    response_format: &'a ResponseFormat,
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

#[derive(Debug)]
pub struct RemoteLlm {
    endpoint: Endpoint,
}

impl RemoteLlm {
    pub fn new(url: &str, key: Option<String>) -> RemoteLlm {
        RemoteLlm { endpoint: Endpoint::new(url, key) }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> RemoteLlm {
        self.endpoint.backoff = backoff;
        self
    }
}

impl LlmProvider for RemoteLlm {
    fn complete(&self, prompt: &Prompt, format: &ResponseFormat) -> Result<String, ProviderError> {
        let body = CompleteRequest { task: prompt.task, messages: &prompt.messages, response_format: format };
        match self.endpoint.post::<_, CompleteResponse>(&body) {
            Ok(r) => Ok(r.text),
            Err(e @ CallError::Decode(_)) | Err(e @ CallError::Status(..)) => Err(ProviderError::BadResponse(e.message())),
            Err(e) => Err(ProviderError::Transport(e.message())),
        }
    }

    fn name(&self) -> &str {
        "remote"
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Remote embedding model. The dimension is learned from the first response.
#[derive(Debug)]
pub struct RemoteEmbedder {
    endpoint: Endpoint,
    dimension: OnceLock<usize>,
}

impl RemoteEmbedder {
    pub fn new(url: &str, key: Option<String>) -> RemoteEmbedder {
        RemoteEmbedder { endpoint: Endpoint::new(url, key), dimension: OnceLock::new() }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> RemoteEmbedder {
        self.endpoint.backoff = backoff;
        self
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let response: EmbedResponse =
            self.endpoint.post(&EmbedRequest { texts }).map_err(|e| EmbedError::Provider(e.message()))?;
        if response.vectors.len() != texts.len() {
            return Err(EmbedError::Provider(format!(
                "expected {} vectors, got {}",
                texts.len(),
                response.vectors.len()
            )));
        }
        let dim = *self.dimension.get_or_init(|| response.vectors.first().map_or(0, Vec::len));
        response
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(EmbedError::DimensionMismatch { expected: dim, found: v.len() });
                }
                EmbeddingVector::normalized(v)
            })
            .collect()
    }

    fn dimension(&self) -> usize {
        self.dimension.get().copied().unwrap_or(0)
    }

    fn name(&self) -> &str {
        "remote"
    }
}
