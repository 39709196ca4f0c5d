//! The conversational layer: a query designer that drafts and refines
//! boolean queries with the user, and an analyst that picks mining tools,
//! runs them and answers from templates.

mod artifacts;
mod compose;
mod designer;
mod provider;
mod rag;
mod session;
mod templates;
mod tools;

use serde::Serializer;

use crate::querylang::{render_query, Query};

pub use artifacts::{artifact_key, ArtifactError, Artifacts, EMBED_BATCH};
pub use compose::{compose_response, render_provenance, ComposeError};
pub use designer::{draft_query, is_approval, refine_query, DesignError, DraftOutcome};
pub use provider::{
    LlmProvider, Prompt, PromptMessage, ProviderError, ResponseFormat, Role, Script, ScriptError, ScriptRule,
    ScriptedProvider, StubProvider, Task,
};
pub use rag::{guard_citations, rag_answer, GuardedText, RagAnswer, RagError, RAG_K};
pub use session::{
    Action, Agent, AgentError, Clock, EntryKind, HistoryEntry, ProvenanceEntry, Session, SessionState, StepClock,
    SystemClock,
};
pub use templates::{fill, parse_exemplars, sha256_hex, slots, Assets, Exemplar, TemplateError, TemplateSet, EXEMPLAR_COUNT};
pub use tools::{
    route, run_tool, select_tools, tool_spec, ParamSpec, ParamType, Provenance, Selection, ToolCall, ToolContext,
    ToolError, ToolResult, ToolSpec, REGISTRY,
};

pub mod outputs {
    //! Typed shapes of tool results, for clients that read envelopes.
    pub use super::tools::{
        BridgingOutput, CommunitiesOutput, CouplingOutput, Group, LinkScore, LinksOutput, NameScore, PageRankOutput,
        PaperScore, PmiOutput, ResearchersOutput, SimilarOutput, TermScore, TopicOutput, TopicSummary, TopicsOutput,
        TrendOutput, YearCount,
    };
}

pub(crate) fn serialize_query<S: Serializer>(query: &Query, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&render_query(query))
}
