//! The query designer: turns a research question into a fielded boolean
//! query and revises it from user feedback.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::provider::{LlmProvider, Prompt, ProviderError, ResponseFormat, Role, Task};
use super::templates::{Assets, Exemplar, TemplateError};
use crate::querylang::{parse_query, render_query, ParseError, Query};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("the message is empty")]
    EmptyInput,
    #[error("no exemplars available")]
    NoExemplars,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("provider did not return valid JSON: {0}")]
    InvalidJson(String),
    #[error("could not produce a valid query; last attempt `{query}` failed: {error}")]
    DraftFailed { query: String, error: ParseError },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DraftOutcome {
    #[serde(serialize_with = "super::serialize_query")]
    pub query: Query,
    /// Repair rounds needed after a parse failure (0 or 1).
    pub repairs: usize,
    /// Calls repeated because the reply was not valid JSON.
    pub json_retries: usize,
}

impl DraftOutcome {
    pub fn rendered(&self) -> String {
        render_query(&self.query)
    }
}

fn query_schema() -> Value {
    json!({
        "type": "object",
        "properties": { "query": { "type": "string" } },
        "required": ["query"]
    })
}

/// Calls the provider in JSON mode, retrying once if the reply does not parse.
pub(crate) fn complete_json(
    provider: &dyn LlmProvider,
    prompt: &Prompt,
    schema: Value,
) -> Result<(Value, usize), DesignError> {
    let format = ResponseFormat::JsonSchema(schema);
    let mut last = String::new();
    for attempt in 0..2 {
        let reply = provider.complete(prompt, &format)?;
        match serde_json::from_str::<Value>(reply.trim()) {
            Ok(value) => return Ok((value, attempt)),
            Err(err) => last = format!("{err} in {reply:?}"),
        }
    }
    Err(DesignError::InvalidJson(last))
}

fn query_field(prompt: &Prompt, provider: &dyn LlmProvider) -> Result<(String, usize), DesignError> {
    let (value, retries) = complete_json(provider, prompt, query_schema())?;
    match value.get("query").and_then(Value::as_str) {
        Some(q) => Ok((q.to_string(), retries)),
        None => Err(DesignError::InvalidJson(format!("missing string field `query` in {value}"))),
    }
}

/// Runs `prompt`, and on a parse failure one repair round quoting the error.
fn obtain_query(provider: &dyn LlmProvider, assets: &Assets, prompt: Prompt) -> Result<DraftOutcome, DesignError> {
    let (text, mut json_retries) = query_field(&prompt, provider)?;
    let error = match parse_query(&text) {
        Ok(query) => return Ok(DraftOutcome { query, repairs: 0, json_retries }),
        Err(error) => error,
    };
    let values = BTreeMap::from([("query", text.clone()), ("error", error.to_string())]);
    let mut repair = Prompt { task: Task::Repair, messages: prompt.messages };
    repair = repair
        .with(Role::Assistant, json!({ "query": text }).to_string())
        .with(Role::User, assets.prompts.render("repair", &values)?);
    let (text, retries) = query_field(&repair, provider)?;
    json_retries += retries;
    match parse_query(&text) {
        Ok(query) => Ok(DraftOutcome { query, repairs: 1, json_retries }),
        Err(error) => Err(DesignError::DraftFailed { query: text, error }),
    }
}

fn exemplar_block(exemplars: &[Exemplar]) -> String {
    exemplars
        .iter()
        .map(|e| format!("Question: {}\nQuery: {}", e.question, e.query))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn draft_query(provider: &dyn LlmProvider, assets: &Assets, user_text: &str) -> Result<DraftOutcome, DesignError> {
    if user_text.trim().is_empty() {
        return Err(DesignError::EmptyInput);
    }
    if assets.exemplars.is_empty() {
        return Err(DesignError::NoExemplars);
    }
    let system = assets.prompts.render("draft", &BTreeMap::from([("exemplars", exemplar_block(&assets.exemplars))]))?;
    let prompt = Prompt::new(Task::Draft).with(Role::System, system).with(Role::User, user_text.trim());
    obtain_query(provider, assets, prompt)
}

pub fn refine_query(
    provider: &dyn LlmProvider,
    assets: &Assets,
    draft: &Query,
    feedback: &str,
) -> Result<DraftOutcome, DesignError> {
    if feedback.trim().is_empty() {
        return Err(DesignError::EmptyInput);
    }
    let system = assets.prompts.render("refine", &BTreeMap::new())?;
    let user = format!("Current query: {}\nFeedback: {}", render_query(draft), feedback.trim());
    let prompt = Prompt::new(Task::Refine).with(Role::System, system).with(Role::User, user);
    obtain_query(provider, assets, prompt)
}

const APPROVALS: &[&str] = &[
    "approve",
    "approved",
    "confirm",
    "confirmed",
    "go ahead",
    "lgtm",
    "looks good",
    "looks good to me",
    "ok",
    "okay",
    "run it",
    "sounds good",
    "y",
    "yes",
    "yes please",
];

/// True only when the whole message is an approval phrase. Anything more
/// ("yes, but add X") is treated as feedback.
pub fn is_approval(text: &str) -> bool {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    APPROVALS.contains(&words.join(" ").as_str())
}
