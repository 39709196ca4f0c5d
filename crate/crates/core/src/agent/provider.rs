use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::text::content_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// What a prompt asks for; lets test doubles answer per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Draft,
    Refine,
    Repair,
    SelectTools,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub task: Task,
    pub messages: Vec<PromptMessage>,
}

impl Prompt {
    pub fn new(task: Task) -> Prompt {
        Prompt { task, messages: Vec::new() }
    }

    pub fn with(mut self, role: Role, content: impl Into<String>) -> Prompt {
        self.messages.push(PromptMessage { role, content: content.into() });
        self
    }

    pub fn last_user(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "schema", rename_all = "snake_case")]
pub enum ResponseFormat {
    Text,
    JsonSchema(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("no scripted response for {task:?} request: {message:?}")]
    NoScript { task: Task, message: String },
    #[error("provider transport failed: {0}")]
    Transport(String),
    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
}

pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &Prompt, format: &ResponseFormat) -> Result<String, ProviderError>;
    fn name(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub task: Task,
    /// Case-insensitive substring of the last user message; absent matches all.
    #[serde(default)]
    pub contains: Option<String>,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub rules: Vec<ScriptRule>,
}

impl Script {
    pub fn rule(mut self, task: Task, contains: Option<&str>, response: impl Into<String>) -> Script {
        self.rules.push(ScriptRule { task, contains: contains.map(str::to_string), response: response.into() });
        self
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid script: {0}")]
    Json(#[from] serde_json::Error),
}

/// Replays canned responses. The first rule whose task matches and whose
/// `contains` occurs in the last user message wins, so answers depend only on
/// the prompt and never on call history.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: Script,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> ScriptedProvider {
        ScriptedProvider { script, calls: AtomicUsize::new(0) }
    }

    pub fn from_file(path: &Path) -> Result<ScriptedProvider, ScriptError> {
        let text = std::fs::read_to_string(path)?;
        Ok(ScriptedProvider::new(serde_json::from_str(&text)?))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmProvider for ScriptedProvider {
    fn complete(&self, prompt: &Prompt, _format: &ResponseFormat) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let message = prompt.last_user().to_lowercase();
        self.script
            .rules
            .iter()
            .find(|r| r.task == prompt.task && r.contains.as_ref().is_none_or(|c| message.contains(&c.to_lowercase())))
            .map(|r| r.response.clone())
            .ok_or_else(|| ProviderError::NoScript { task: prompt.task, message: prompt.last_user().to_string() })
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Offline heuristic provider: drafts a topic search from the content words of
/// the request, defers tool choice to the keyword router and answers by
/// citing the retrieved papers in order.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubProvider;

const STUB_TERMS: usize = 4;

fn stub_terms(text: &str) -> Vec<String> {
    let mut terms: Vec<String> = Vec::new();
    for token in content_tokens(text) {
        if !terms.contains(&token) && token.chars().all(|c| c.is_ascii_alphanumeric()) {
            terms.push(token);
        }
    }
    terms.truncate(STUB_TERMS);
    terms
}

fn json_query(query: &str) -> String {
    serde_json::json!({ "query": query }).to_string()
}

impl LlmProvider for StubProvider {
    fn complete(&self, prompt: &Prompt, _format: &ResponseFormat) -> Result<String, ProviderError> {
        let message = prompt.last_user();
        match prompt.task {
            Task::Draft | Task::Repair => {
                let terms = stub_terms(message);
                if terms.is_empty() {
                    return Err(ProviderError::BadResponse("request has no content words".into()));
                }
                Ok(json_query(&format!("TS=({})", terms.join(" OR "))))
            }
            Task::Refine => {
                let (current, feedback) = message
                    .split_once("\nFeedback: ")
                    .ok_or_else(|| ProviderError::BadResponse("refine prompt without feedback".into()))?;
                let current = current.trim_start_matches("Current query: ").trim();
                let terms: Vec<String> =
                    stub_terms(feedback).into_iter().filter(|t| !["include", "add", "also"].contains(&t.as_str())).collect();
                if terms.is_empty() {
                    return Ok(json_query(current));
                }
                Ok(json_query(&format!("({current}) OR TS=({})", terms.join(" OR "))))
            }
            Task::SelectTools => Ok("[]".into()),
            Task::Answer => {
                let cited: Vec<&str> = prompt
                    .messages
                    .iter()
                    .flat_map(|m| m.content.lines())
                    .filter_map(|l| l.strip_prefix('[').and_then(|l| l.split_once(']')).map(|(uid, _)| uid))
                    .take(3)
                    .collect();
                if cited.is_empty() {
                    return Ok("No retrieved paper addresses this question.".into());
                }
                let refs: Vec<String> = cited.iter().map(|u| format!("[{u}]")).collect();
                Ok(format!("The most relevant retrieved papers are {}.", refs.join(", ")))
            }
        }
    }

    fn name(&self) -> &str {
        "stub"
    }
}
