use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::artifacts::{artifact_key, ArtifactError, Artifacts};
use super::compose::compose_response;
use super::designer::{draft_query, is_approval, refine_query, DesignError};
use super::provider::{LlmProvider, Role};
use super::templates::Assets;
use super::tools::{run_tool, select_tools, ToolContext, ToolResult};
use crate::client::ScholarlyDatabaseClient;
use crate::corpus::CorpusStore;
use crate::embed::EmbeddingProvider;
use crate::mining::MiningParams;
use crate::querylang::{parse_query, render_query, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Drafting,
    AwaitingConfirmation,
    Retrieving,
    Ready,
    Analyzing,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Message,
    /// A user approval of the draft query, by text or button.
    Approval,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub role: Role,
    pub kind: EntryKind,
    pub text: String,
    pub at_ms: u64,
    /// State when the entry was appended.
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub at_ms: u64,
    pub event: String,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub state: SessionState,
    /// Canonical rendering of the current draft.
    pub draft: Option<String>,
    /// The draft as approved; set from approval onwards.
    pub confirmed: Option<String>,
    pub history: Vec<HistoryEntry>,
    pub corpus_ref: Option<String>,
    pub bkg_ref: Option<String>,
    pub topic_model_ref: Option<String>,
    pub provenance: Vec<ProvenanceEntry>,
    #[serde(skip)]
    artifacts: Option<Arc<Artifacts>>,
}

impl PartialEq for Session {
    fn eq(&self, other: &Session) -> bool {
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

impl Session {
    pub fn artifacts(&self) -> Option<&Arc<Artifacts>> {
        self.artifacts.as_ref()
    }

    pub fn draft_query(&self) -> Option<Query> {
        self.draft.as_deref().and_then(|d| parse_query(d).ok())
    }

    pub fn approved(&self) -> bool {
        self.history.iter().any(|h| h.kind == EntryKind::Approval)
    }

    /// Messages only, one `role: text` block per entry.
    pub fn transcript(&self) -> String {
        self.history
            .iter()
            .filter(|h| h.kind != EntryKind::Transition)
            .map(|h| {
                let role = match h.role {
                    Role::User => "user",
                    Role::Assistant => "assistant",
                    Role::System => "system",
                };
                format!("{role}: {}\n", h.text)
            })
            .collect()
    }

    /// Assistant messages appended after history index `from`.
    pub fn replies_since(&self, from: usize) -> Vec<&HistoryEntry> {
        self.history[from.min(self.history.len())..]
            .iter()
            .filter(|h| h.role == Role::Assistant && h.kind == EntryKind::Message)
            .collect()
    }
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Deterministic clock advancing a fixed step per reading.
#[derive(Debug)]
pub struct StepClock {
    next: AtomicU64,
    step: u64,
}

impl StepClock {
    pub fn new(start: u64, step: u64) -> StepClock {
        StepClock { next: AtomicU64::new(start), step }
    }
}

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Say { text: String },
    ShowDraft { query: String },
    Retrieved { papers: usize, embedded: usize },
    ToolRan { result: ToolResult },
    ToolFailed { tool: String, message: String },
    Rejected { reason: String },
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("message text is empty")]
    EmptyMessage,
}

pub struct Agent {
    provider: Arc<dyn LlmProvider>,
    embedder: Arc<dyn EmbeddingProvider>,
    client: Arc<dyn ScholarlyDatabaseClient>,
    assets: Arc<Assets>,
    params: MiningParams,
    clock: Arc<dyn Clock>,
    cache: Mutex<BTreeMap<String, Arc<Artifacts>>>,
}

impl Agent {
    pub fn new(
        provider: Arc<dyn LlmProvider>,
        embedder: Arc<dyn EmbeddingProvider>,
        client: Arc<dyn ScholarlyDatabaseClient>,
        assets: Arc<Assets>,
        params: MiningParams,
        clock: Arc<dyn Clock>,
    ) -> Agent {
        Agent { provider, embedder, client, assets, params, clock, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn assets(&self) -> &Assets {
        &self.assets
    }

    pub fn params(&self) -> &MiningParams {
        &self.params
    }

    pub fn new_session(&self, id: String) -> Session {
        let mut session = Session {
            id,
            state: SessionState::Drafting,
            draft: None,
            confirmed: None,
            history: Vec::new(),
            corpus_ref: None,
            bkg_ref: None,
            topic_model_ref: None,
            provenance: Vec::new(),
            artifacts: None,
        };
        let detail = json!({
            "provider": self.provider.name(),
            "embedder": self.embedder.name(),
            "database": self.client.name(),
            "params": self.params,
            "checksums": self.assets.checksums(),
        });
        self.log(&mut session, "session_created", detail);
        session
    }

    fn log(&self, s: &mut Session, event: &str, detail: Value) {
        s.provenance.push(ProvenanceEntry { at_ms: self.clock.now_ms(), event: event.into(), detail });
    }

    fn push(&self, s: &mut Session, role: Role, kind: EntryKind, text: String) {
        s.history.push(HistoryEntry { role, kind, text, at_ms: self.clock.now_ms(), state: s.state });
    }

    fn say(&self, s: &mut Session, actions: &mut Vec<Action>, text: String) {
        self.push(s, Role::Assistant, EntryKind::Message, text.clone());
        actions.push(Action::Say { text });
    }

    fn transition(&self, s: &mut Session, to: SessionState) {
        let text = format!("state {} -> {}", s.state, to);
        s.state = to;
        self.push(s, Role::System, EntryKind::Transition, text);
    }

    /// Routes one user message through the state machine.
    pub fn advance(&self, s: &mut Session, text: &str) -> Result<Vec<Action>, AgentError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(AgentError::EmptyMessage);
        }
        let mut actions = Vec::new();
        let approval = s.state == SessionState::AwaitingConfirmation && is_approval(text);
        let kind = if approval { EntryKind::Approval } else { EntryKind::Message };
        self.push(s, Role::User, kind, text.to_string());
        match s.state {
            SessionState::Drafting if is_approval(text) => {
                let reason = "There is no draft query to approve yet. Describe your research question first.";
                actions.push(Action::Rejected { reason: reason.into() });
                self.say(s, &mut actions, reason.into());
            }
            SessionState::Drafting => self.draft(s, text, &mut actions),
            SessionState::AwaitingConfirmation if approval => self.approve_inner(s, "text", &mut actions),
            SessionState::AwaitingConfirmation => self.refine(s, text, &mut actions),
            SessionState::Ready => self.analyze(s, text, &mut actions),
            SessionState::Retrieving | SessionState::Analyzing => {
                let reason = format!("The session is busy ({}); try again shortly.", s.state);
                actions.push(Action::Rejected { reason: reason.clone() });
                self.say(s, &mut actions, reason);
            }
        }
        Ok(actions)
    }

    /// Explicit approval (the authoritative path, e.g. a button).
    pub fn approve(&self, s: &mut Session) -> Vec<Action> {
        let mut actions = Vec::new();
        if s.state != SessionState::AwaitingConfirmation {
            let reason = format!("There is no draft awaiting approval (state {}).", s.state);
            actions.push(Action::Rejected { reason: reason.clone() });
            self.say(s, &mut actions, reason);
            return actions;
        }
        self.push(s, Role::User, EntryKind::Approval, "(approved)".into());
        self.approve_inner(s, "button", &mut actions);
        actions
    }

    fn show_draft(&self, s: &mut Session, lead: &str, query: String, actions: &mut Vec<Action>) {
        s.draft = Some(query.clone());
        actions.push(Action::ShowDraft { query: query.clone() });
        let text = format!("{lead}\n\n{query}\n\nReply \"approve\" to run it, or tell me what to change.");
        self.say(s, actions, text);
    }

    fn draft(&self, s: &mut Session, text: &str, actions: &mut Vec<Action>) {
        match draft_query(self.provider.as_ref(), &self.assets, text) {
            Ok(out) => {
                let query = out.rendered();
                self.log(s, "draft", json!({ "query": query, "repairs": out.repairs, "json_retries": out.json_retries }));
                self.transition(s, SessionState::AwaitingConfirmation);
                self.show_draft(s, "Here is a draft search query:", query, actions);
            }
            Err(err) => self.design_failed(s, err, "Please rephrase your question.", actions),
        }
    }

    fn refine(&self, s: &mut Session, feedback: &str, actions: &mut Vec<Action>) {
        let Some(current) = s.draft_query() else {
            self.transition(s, SessionState::Drafting);
            return self.draft(s, feedback, actions);
        };
        match refine_query(self.provider.as_ref(), &self.assets, &current, feedback) {
            Ok(out) => {
                let query = out.rendered();
                self.log(
                    s,
                    "refine",
                    json!({ "from": render_query(&current), "query": query, "repairs": out.repairs, "json_retries": out.json_retries }),
                );
                self.show_draft(s, "Updated search query:", query, actions);
            }
            Err(err) => self.design_failed(s, err, "The current draft is unchanged.", actions),
        }
    }

    fn design_failed(&self, s: &mut Session, err: DesignError, advice: &str, actions: &mut Vec<Action>) {
        self.log(s, "design_failed", json!({ "error": err.to_string() }));
        self.say(s, actions, format!("I could not produce a valid query: {err}. {advice}"));
    }

    fn approve_inner(&self, s: &mut Session, source: &str, actions: &mut Vec<Action>) {
        s.confirmed = s.draft.clone();
        self.log(s, "approval", json!({ "source": source, "query": s.confirmed }));
        self.transition(s, SessionState::Retrieving);
        match self.retrieve(s) {
            Ok(a) => {
                let m = &a.model;
                self.log(
                    s,
                    "retrieval",
                    json!({
                        "query": s.confirmed,
                        "retrieved": a.store.len(),
                        "embedded": a.index.len(),
                        "skipped": a.skipped,
                        "topics": m.k,
                        "outliers": m.outlier_count,
                        "artifact_key": a.key(),
                    }),
                );
                self.transition(s, SessionState::Ready);
                actions.push(Action::Retrieved { papers: a.store.len(), embedded: a.index.len() });
                let text = format!(
                    "Retrieved {} papers. {} were embedded and grouped into {} topics with {} outliers. \
                     Ask about topics, trends, influential papers, active authors, research groups or open gaps.",
                    a.store.len(),
                    a.index.len(),
                    m.k,
                    m.outlier_count
                );
                self.say(s, actions, text);
            }
            Err(err) => {
                self.log(s, "retrieval_failed", json!({ "error": err.to_string() }));
                s.confirmed = None;
                self.transition(s, SessionState::AwaitingConfirmation);
                self.say(s, actions, format!("{err}. Please refine the query."));
            }
        }
    }

    fn retrieve(&self, s: &mut Session) -> Result<Arc<Artifacts>, ArtifactError> {
        let query = s.confirmed.as_deref().and_then(|q| parse_query(q).ok()).ok_or(ArtifactError::NoQuery)?;
        let records = self.client.search(&query).map_err(|e| ArtifactError::Database(e.to_string()))?;
        let store = CorpusStore::from_records(records.iter().cloned());
        let key = artifact_key(&store, self.embedder.name(), &self.params);
        let cached = self.cache.lock().expect("artifact cache poisoned").get(&key).cloned();
        let artifacts = match cached {
            Some(a) => a,
            None => {
                let built = Arc::new(Artifacts::build(records, self.embedder.as_ref(), &self.params)?);
                self.cache.lock().expect("artifact cache poisoned").insert(key, built.clone());
                built
            }
        };
        s.corpus_ref = Some(artifacts.store.fingerprint());
        s.bkg_ref = Some(format!("bkg-{}", artifacts.key()));
        s.topic_model_ref = Some(format!("topics-{}", artifacts.key()));
        s.artifacts = Some(artifacts.clone());
        Ok(artifacts)
    }

    fn analyze(&self, s: &mut Session, text: &str, actions: &mut Vec<Action>) {
        let Some(artifacts) = s.artifacts.clone() else {
            let reason = "The retrieved collection is not loaded; approve the query again.".to_string();
            actions.push(Action::Rejected { reason: reason.clone() });
            return self.say(s, actions, reason);
        };
        self.transition(s, SessionState::Analyzing);
        let selection = select_tools(self.provider.as_ref(), &self.assets, text, &artifacts);
        self.log(
            s,
            "selection",
            json!({ "calls": selection.calls, "dropped": selection.dropped, "fallback": selection.fallback }),
        );
        let ctx = ToolContext {
            artifacts: &artifacts,
            provider: self.provider.as_ref(),
            embedder: self.embedder.as_ref(),
            assets: &self.assets,
        };
        let mut results = Vec::new();
        let mut failures = Vec::new();
        for call in &selection.calls {
            match run_tool(call, &ctx) {
                Ok(result) => {
                    self.log(s, "tool", serde_json::to_value(&result).expect("envelopes serialize"));
                    actions.push(Action::ToolRan { result: result.clone() });
                    results.push(result);
                }
                Err(err) => {
                    self.log(s, "tool_error", json!({ "tool": err.tool, "message": err.message }));
                    actions.push(Action::ToolFailed { tool: err.tool.clone(), message: err.message.clone() });
                    failures.push(format!("Could not run {}: {}.", err.tool, err.message));
                }
            }
        }
        let mut sections = Vec::new();
        if !results.is_empty() {
            match compose_response(&self.assets.responses, &results) {
                Ok(text) => sections.push(text),
                Err(err) => failures.push(format!("Could not compose the answer: {err}.")),
            }
        }
        sections.extend(failures);
        self.say(s, actions, sections.join("\n\n"));
        self.transition(s, SessionState::Ready);
    }

    /// Rebuilds in-memory artifacts of a deserialized session. A session
    /// interrupted mid-retrieval finishes it; one interrupted mid-analysis
    /// returns to Ready.
    pub fn restore(&self, s: &mut Session) -> Result<(), ArtifactError> {
        match s.state {
            SessionState::Drafting | SessionState::AwaitingConfirmation => Ok(()),
            SessionState::Ready | SessionState::Analyzing => {
                if s.artifacts.is_none() {
                    self.retrieve(s)?;
                }
                if s.state == SessionState::Analyzing {
                    self.transition(s, SessionState::Ready);
                }
                Ok(())
            }
            SessionState::Retrieving => {
                let mut actions = Vec::new();
                s.state = SessionState::AwaitingConfirmation;
                self.approve_inner(s, "resume", &mut actions);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::provider::{Script, ScriptedProvider, Task};
    use crate::client::LocalCorpusClient;
    use crate::embed::StubEmbedder;

    fn corpus() -> Arc<CorpusStore> {
        Arc::new(CorpusStore::ingest([
            r#"{"uid":"p1","title":"LLM triage in emergency care","year":2023,"keywords":["llm","triage"]}"#,
            r#"{"uid":"p2","title":"LLM summaries of clinical notes","year":2024,"keywords":["llm","notes"]}"#,
            r#"{"uid":"p3","title":"Speech markers of dementia","year":2021,"keywords":["speech"]}"#,
        ]))
    }

    fn agent(script: Script) -> Agent {
        Agent::new(
            Arc::new(ScriptedProvider::new(script)),
            Arc::new(StubEmbedder),
            Arc::new(LocalCorpusClient::new(corpus())),
            Arc::new(Assets::builtin()),
            MiningParams::default(),
            Arc::new(StepClock::new(0, 1)),
        )
    }

    fn q(s: &str) -> String {
        json!({ "query": s }).to_string()
    }

    #[test]
    fn draft_then_approve_then_analyze() {
        let a = agent(
            Script::default()
                .rule(Task::Draft, None, q("TS=(llm)"))
                .rule(Task::SelectTools, Some("topics"), r#"[{"tool":"fit_topics"}]"#),
        );
        let mut s = a.new_session("s1".into());
        a.advance(&mut s, "llms in medicine").unwrap();
        assert_eq!(s.state, SessionState::AwaitingConfirmation);
        assert_eq!(s.draft.as_deref(), Some("TS=(llm)"));
        let actions = a.advance(&mut s, "looks good").unwrap();
        assert_eq!(s.state, SessionState::Ready);
        assert!(actions.contains(&Action::Retrieved { papers: 2, embedded: 2 }));
        assert!(s.approved());
        let actions = a.advance(&mut s, "what topics exist?").unwrap();
        assert_eq!(s.state, SessionState::Ready);
        assert!(matches!(&actions[0], Action::ToolRan { result } if result.tool == "fit_topics"));
        assert!(s.history.iter().any(|h| h.state == SessionState::Analyzing));
    }

    #[test]
    fn approval_without_draft_is_rejected() {
        let a = agent(Script::default());
        let mut s = a.new_session("s".into());
        let actions = a.advance(&mut s, "yes").unwrap();
        assert!(matches!(actions[0], Action::Rejected { .. }));
        assert_eq!(s.state, SessionState::Drafting);
        assert!(matches!(a.approve(&mut s)[0], Action::Rejected { .. }));
        assert!(!s.approved());
    }

    #[test]
    fn too_few_papers_returns_to_confirmation() {
        let a = agent(Script::default().rule(Task::Draft, None, q("TS=(dementia)")));
        let mut s = a.new_session("s".into());
        a.advance(&mut s, "dementia").unwrap();
        a.approve(&mut s);
        assert_eq!(s.state, SessionState::AwaitingConfirmation);
        assert!(s.history.last().unwrap().text.contains("matched 1 papers"));
    }

    #[test]
    fn provider_failure_keeps_state() {
        let a = agent(Script::default());
        let mut s = a.new_session("s".into());
        a.advance(&mut s, "anything").unwrap();
        assert_eq!(s.state, SessionState::Drafting);
        assert!(matches!(a.advance(&mut s, "  "), Err(AgentError::EmptyMessage)));
    }

    #[test]
    fn resume_rebuilds_artifacts() {
        let a = agent(Script::default().rule(Task::Draft, None, q("TS=(llm)")));
        let mut s = a.new_session("s".into());
        a.advance(&mut s, "llm").unwrap();
        a.approve(&mut s);
        let mut restored: Session = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert!(restored.artifacts().is_none());
        a.restore(&mut restored).unwrap();
        assert_eq!(restored.artifacts().unwrap().key(), s.artifacts().unwrap().key());
        assert_eq!(restored, s);
    }
}
