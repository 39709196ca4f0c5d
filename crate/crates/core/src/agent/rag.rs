//! Retrieval-augmented answers with a citation guard: the provider may only
//! cite papers it was shown.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::provider::{LlmProvider, Prompt, ProviderError, ResponseFormat, Role, Task};
use super::templates::{Assets, TemplateError};
use crate::corpus::CorpusStore;
use crate::embed::{EmbedError, EmbeddingIndex, EmbeddingProvider};

pub const RAG_K: usize = 8;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("the question is empty")]
    EmptyQuestion,
    #[error("no papers are embedded")]
    EmptyCorpus,
    #[error("cannot embed the question: {0}")]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagAnswer {
    pub answer: String,
    /// Retrieved uids in similarity order.
    pub retrieved: Vec<String>,
    /// Citations kept, in order of first appearance.
    pub cited: Vec<String>,
    /// Citations removed because they were not retrieved.
    pub stripped: Vec<String>,
}

fn is_uid_like(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || "-_.:/".contains(c))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardedText {
    pub text: String,
    pub cited: Vec<String>,
    pub stripped: Vec<String>,
}

/// Keeps bracketed citations of `allowed` uids and removes all others.
/// `[a, b]` lists are filtered element-wise; brackets that are not citation
/// shaped are left untouched.
pub fn guard_citations(text: &str, allowed: &BTreeSet<&str>) -> GuardedText {
    let mut out = String::with_capacity(text.len());
    let mut cited = Vec::new();
    let mut stripped = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('[') {
        let Some(len) = rest[open + 1..].find(']') else { break };
        let inner = &rest[open + 1..open + 1 + len];
        let parts: Vec<&str> = inner.split([',', ';']).map(str::trim).collect();
        if !parts.iter().all(|p| is_uid_like(p)) {
            out.push_str(&rest[..open + 2 + len]);
            rest = &rest[open + 2 + len..];
            continue;
        }
        let (keep, drop): (Vec<&str>, Vec<&str>) = parts.into_iter().partition(|p| allowed.contains(p));
        for uid in &keep {
            if !cited.iter().any(|c| c == uid) {
                cited.push(uid.to_string());
            }
        }
        for uid in drop {
            if !stripped.iter().any(|c| c == uid) {
                stripped.push(uid.to_string());
            }
        }
        let mut before = &rest[..open];
        if keep.is_empty() {
            before = before.trim_end_matches(' ');
        } else {
            out.push_str(before);
            out.push_str(&format!("[{}]", keep.join(", ")));
            before = "";
        }
        out.push_str(before);
        rest = &rest[open + 2 + len..];
    }
    out.push_str(rest);
    GuardedText { text: out, cited, stripped }
}

pub fn rag_answer(
    provider: &dyn LlmProvider,
    assets: &Assets,
    embedder: &dyn EmbeddingProvider,
    index: &EmbeddingIndex,
    store: &CorpusStore,
    question: &str,
    k: usize,
) -> Result<RagAnswer, RagError> {
    if question.trim().is_empty() {
        return Err(RagError::EmptyQuestion);
    }
    if index.is_empty() {
        return Err(RagError::EmptyCorpus);
    }
    let query = embedder.embed_batch(&[question.trim().to_string()])?.pop().ok_or(EmbedError::EmptyText)?;
    let retrieved: Vec<String> = index.knn(&query, k.max(1))?.into_iter().map(|(uid, _)| uid).collect();
    let passages = retrieved
        .iter()
        .map(|uid| match store.get(uid) {
            Some(r) => format!("[{uid}] {} ({})\n{}", r.title, r.year, r.abstract_text),
            None => format!("[{uid}]"),
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    let system = assets.prompts.render(
        "answer",
        &BTreeMap::from([("passages", passages), ("example_uid", retrieved[0].clone())]),
    )?;
    let prompt = Prompt::new(Task::Answer).with(Role::System, system).with(Role::User, question.trim());
    let raw = provider.complete(&prompt, &ResponseFormat::Text)?;
    let allowed: BTreeSet<&str> = retrieved.iter().map(String::as_str).collect();
    let guarded = guard_citations(raw.trim(), &allowed);
    Ok(RagAnswer { answer: guarded.text, retrieved, cited: guarded.cited, stripped: guarded.stripped })
}
