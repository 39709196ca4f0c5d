//! The analysis tool library: a declared registry, call validation, tool
//! selection with a keyword fallback, and execution into JSON envelopes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;
use tracing::warn;

use super::artifacts::Artifacts;
use super::designer::complete_json;
use super::provider::{LlmProvider, Prompt, Role, Task};
use super::rag::{rag_answer, RAG_K};
use super::templates::Assets;
use crate::bkg::{NodeId, NodeKind, WeightedGraph};
use crate::embed::EmbeddingProvider;
use crate::mining::{
    active_researchers, biblio_coupling, bridging_keywords, co_citation, communities, default_topic_count,
    fit_topics, keyword_totals, pagerank, pmi, predict_links, recommend_similar, representatives, topic_trend,
    MiningParams, TopicModel, OUTLIER,
};
use crate::text::squash;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamType {
    Integer { min: i64 },
    Number,
    Text,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub ty: ParamType,
    pub required: bool,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolSpec {
    pub name: &'static str,
    pub doc: &'static str,
    pub params: &'static [ParamSpec],
}

const fn opt(name: &'static str, ty: ParamType, doc: &'static str) -> ParamSpec {
    ParamSpec { name, ty, required: false, doc }
}

const fn req(name: &'static str, ty: ParamType, doc: &'static str) -> ParamSpec {
    ParamSpec { name, ty, required: true, doc }
}

const COUNT: ParamType = ParamType::Integer { min: 1 };
const TOPIC_ID: ParamType = ParamType::Integer { min: OUTLIER };
const GRAPHS: ParamType = ParamType::Choice(&["coauthor", "keyword"]);

/// Registry order is also the order in which results are composed.
pub const REGISTRY: &[ToolSpec] = &[
    ToolSpec {
        name: "fit_topics",
        doc: "Cluster the papers into topics with sizes, key terms and outliers.",
        params: &[
            opt("k", COUNT, "number of topics"),
            opt("outlier_threshold", ParamType::Number, "minimum cosine to a topic centroid"),
        ],
    },
    ToolSpec {
        name: "topic",
        doc: "Details of one topic: size, key terms and representative papers.",
        params: &[req("topic_id", TOPIC_ID, "topic id, -1 for outliers"), opt("k", COUNT, "representatives to list")],
    },
    ToolSpec {
        name: "topic_trend",
        doc: "Papers per publication year for one topic.",
        params: &[req("topic_id", TOPIC_ID, "topic id, -1 for outliers")],
    },
    ToolSpec {
        name: "recommend_similar",
        doc: "Papers similar to a given paper by text and shared references.",
        params: &[req("uid", ParamType::Text, "paper identifier"), opt("k", COUNT, "papers to list")],
    },
    ToolSpec {
        name: "pagerank",
        doc: "Most influential papers by PageRank over the citation network.",
        params: &[
            opt("damping", ParamType::Number, "damping factor in (0, 1)"),
            opt("tol", ParamType::Number, "convergence tolerance"),
            opt("k", COUNT, "papers to list"),
        ],
    },
    ToolSpec {
        name: "coupling",
        doc: "Shared references and co-citations of two papers.",
        params: &[req("a", ParamType::Text, "paper identifier"), req("b", ParamType::Text, "paper identifier")],
    },
    ToolSpec {
        name: "active_researchers",
        doc: "Most active authors by papers written and co-authorships.",
        params: &[opt("k", COUNT, "authors to list")],
    },
    ToolSpec {
        name: "communities",
        doc: "Research groups found by label propagation on the co-author or keyword network.",
        params: &[opt("graph", GRAPHS, "network to partition"), opt("k", COUNT, "groups to list")],
    },
    ToolSpec {
        name: "bridging_keywords",
        doc: "Keywords that connect different keyword communities.",
        params: &[opt("k", COUNT, "keywords to list")],
    },
    ToolSpec {
        name: "keyword_pmi",
        doc: "Pointwise mutual information of two keywords.",
        params: &[req("a", ParamType::Text, "keyword"), req("b", ParamType::Text, "keyword")],
    },
    ToolSpec {
        name: "predict_links",
        doc: "Likely future links (research ideas) by the Adamic-Adar index.",
        params: &[opt("graph", GRAPHS, "network to analyze"), opt("k", COUNT, "pairs to list")],
    },
    ToolSpec {
        name: "rag_answer",
        doc: "Answer a free-form question from the most similar abstracts, citing papers.",
        params: &[req("question", ParamType::Text, "the question"), opt("k", COUNT, "abstracts to retrieve")],
    },
];

pub fn tool_spec(name: &str) -> Option<(usize, &'static ToolSpec)> {
    REGISTRY.iter().enumerate().find(|(_, t)| t.name == name)
}

impl ToolSpec {
    pub fn json_schema(&self) -> Value {
        let mut properties = Map::new();
        for p in self.params {
            let mut schema = match p.ty {
                ParamType::Integer { min } => json!({ "type": "integer", "minimum": min }),
                ParamType::Number => json!({ "type": "number" }),
                ParamType::Text => json!({ "type": "string", "minLength": 1 }),
                ParamType::Choice(options) => json!({ "type": "string", "enum": options }),
            };
            schema["description"] = json!(p.doc);
            properties.insert(p.name.into(), schema);
        }
        let required: Vec<&str> = self.params.iter().filter(|p| p.required).map(|p| p.name).collect();
        json!({ "type": "object", "properties": properties, "required": required, "additionalProperties": false })
    }

    pub fn validate(&self, params: &Map<String, Value>) -> Result<(), String> {
        for name in params.keys() {
            if !self.params.iter().any(|p| p.name == name) {
                return Err(format!("{}: unknown parameter `{name}`", self.name));
            }
        }
        for p in self.params {
            let Some(value) = params.get(p.name) else {
                if p.required {
                    return Err(format!("{}: missing parameter `{}`", self.name, p.name));
                }
                continue;
            };
            let ok = match p.ty {
                ParamType::Integer { min } => value.as_i64().is_some_and(|v| v >= min),
                ParamType::Number => value.as_f64().is_some_and(f64::is_finite),
                ParamType::Text => value.as_str().is_some_and(|s| !s.trim().is_empty()),
                ParamType::Choice(options) => value.as_str().is_some_and(|s| options.contains(&s)),
            };
            if !ok {
                return Err(format!("{}: invalid value {value} for `{}`", self.name, p.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ToolCall {
    pub fn new(tool: &str, params: Value) -> ToolCall {
        let params = match params {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        ToolCall { tool: tool.into(), params }
    }

    pub fn validate(&self) -> Result<usize, String> {
        let (position, spec) = tool_spec(&self.tool).ok_or_else(|| format!("unknown tool `{}`", self.tool))?;
        spec.validate(&self.params)?;
        Ok(position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// Valid calls in registry order.
    pub calls: Vec<ToolCall>,
    /// Reasons for rejected provider output.
    pub dropped: Vec<String>,
    pub fallback: bool,
}

fn first_number(text: &str) -> Option<i64> {
    text.split(|c: char| !(c.is_ascii_digit() || c == '-'))
        .filter_map(|t| t.parse::<i64>().ok())
        .find(|n| *n >= OUTLIER)
}

fn largest_topic(model: &TopicModel) -> i64 {
    model
        .sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map_or(OUTLIER, |(t, _)| t as i64)
}

/// Keyword router used when the provider's selection is unusable.
pub fn route(text: &str, artifacts: &Artifacts) -> Vec<ToolCall> {
    let lower = text.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| lower.contains(w));
    let mut calls = Vec::new();
    if has(&["trend"]) {
        let topic = first_number(&lower).unwrap_or_else(|| largest_topic(&artifacts.model));
        calls.push(ToolCall::new("topic_trend", json!({ "topic_id": topic })));
    } else if has(&["topic"]) {
        match first_number(&lower) {
            Some(topic) => calls.push(ToolCall::new("topic", json!({ "topic_id": topic }))),
            None => calls.push(ToolCall::new("fit_topics", json!({}))),
        }
    }
    if has(&["similar"]) {
        let uid = text
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .find(|w| artifacts.store.contains(w));
        if let Some(uid) = uid {
            calls.push(ToolCall::new("recommend_similar", json!({ "uid": uid })));
        }
    }
    if has(&["author"]) {
        calls.push(ToolCall::new("active_researchers", json!({})));
    }
    if has(&["group"]) {
        calls.push(ToolCall::new("communities", json!({})));
    }
    if has(&["influential", "impact"]) {
        calls.push(ToolCall::new("pagerank", json!({})));
    }
    if has(&["idea", "gap"]) {
        calls.push(ToolCall::new("predict_links", json!({})));
    }
    if calls.is_empty() {
        calls.push(ToolCall::new("rag_answer", json!({ "question": text.trim() })));
    }
    order_calls(calls)
}

fn order_calls(calls: Vec<ToolCall>) -> Vec<ToolCall> {
    let mut keyed: Vec<(usize, ToolCall)> =
        calls.into_iter().filter_map(|c| c.validate().ok().map(|pos| (pos, c))).collect();
    keyed.sort_by_key(|(pos, _)| *pos);
    keyed.dedup_by(|a, b| a.1 == b.1);
    keyed.into_iter().map(|(_, c)| c).collect()
}

fn registry_listing() -> String {
    REGISTRY
        .iter()
        .map(|t| format!("- {}: {} Parameters: {}", t.name, t.doc, t.json_schema()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn selection_schema() -> Value {
    json!({
        "type": "array",
        "minItems": 1,
        "items": {
            "type": "object",
            "properties": { "tool": { "type": "string" }, "params": { "type": "object" } },
            "required": ["tool"]
        }
    })
}

/// Asks the provider for tool calls and validates each one. Falls back to the
/// keyword router when nothing valid remains, so the result is never empty.
pub fn select_tools(provider: &dyn LlmProvider, assets: &Assets, text: &str, artifacts: &Artifacts) -> Selection {
    let mut dropped = Vec::new();
    let mut calls = Vec::new();
    let values = BTreeMap::from([
        ("papers", artifacts.store.len().to_string()),
        ("topics", artifacts.model.k.to_string()),
        ("registry", registry_listing()),
    ]);
    match assets.prompts.render("select_tools", &values) {
        Err(err) => dropped.push(err.to_string()),
        Ok(system) => {
            let prompt = Prompt::new(Task::SelectTools).with(Role::System, system).with(Role::User, text.trim());
            match complete_json(provider, &prompt, selection_schema()) {
                Err(err) => dropped.push(err.to_string()),
                Ok((value, _)) => {
                    let items = match value {
                        Value::Array(items) => items,
                        Value::Object(mut obj) => match obj.remove("calls") {
                            Some(Value::Array(items)) => items,
                            _ => vec![Value::Object(obj)],
                        },
                        other => {
                            dropped.push(format!("expected an array of calls, got {other}"));
                            Vec::new()
                        }
                    };
                    for item in items {
                        match serde_json::from_value::<ToolCall>(item.clone()) {
                            Err(err) => dropped.push(format!("malformed call {item}: {err}")),
                            Ok(call) => match call.validate() {
                                Ok(_) => calls.push(call),
                                Err(reason) => dropped.push(reason),
                            },
                        }
                    }
                }
            }
        }
    }
    for reason in &dropped {
        warn!(%reason, "dropped tool selection");
    }
    let calls = order_calls(calls);
    if calls.is_empty() {
        return Selection { calls: route(text, artifacts), dropped, fallback: true };
    }
    Selection { calls, dropped, fallback: false }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub counts: BTreeMap<String, u64>,
    pub thresholds: BTreeMap<String, f64>,
}

impl Provenance {
    fn count(mut self, name: &str, value: usize) -> Provenance {
        self.counts.insert(name.into(), value as u64);
        self
    }

    fn threshold(mut self, name: &str, value: f64) -> Provenance {
        self.thresholds.insert(name.into(), value);
        self
    }
}

/// The serialized outcome of one tool run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool: String,
    /// Parameters actually used, defaults resolved.
    pub params: Map<String, Value>,
    pub result: Value,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ToolError {
    pub tool: String,
    pub message: String,
}

pub struct ToolContext<'a> {
    pub artifacts: &'a Artifacts,
    pub provider: &'a dyn LlmProvider,
    pub embedder: &'a dyn EmbeddingProvider,
    pub assets: &'a Assets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub id: i64,
    pub size: usize,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsOutput {
    pub papers: usize,
    pub outliers: usize,
    pub iterations: usize,
    pub converged: bool,
    pub topics: Vec<TopicSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperScore {
    pub uid: String,
    pub title: String,
    pub year: i32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicOutput {
    pub topic_id: i64,
    pub size: usize,
    pub terms: Vec<TermScore>,
    pub representatives: Vec<PaperScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearCount {
    pub year: i32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendOutput {
    pub topic_id: i64,
    pub members: usize,
    pub trend: Vec<YearCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarOutput {
    pub uid: String,
    pub candidates: usize,
    pub recommendations: Vec<PaperScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRankOutput {
    pub papers: usize,
    pub citations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub top: Vec<PaperScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingOutput {
    pub a: String,
    pub b: String,
    pub coupling: usize,
    pub co_citation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameScore {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchersOutput {
    pub authors: usize,
    pub top: Vec<NameScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: usize,
    pub size: usize,
    /// Up to five members in id order.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunitiesOutput {
    pub graph: String,
    pub nodes: usize,
    pub edges: usize,
    pub count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub groups: Vec<Group>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgingOutput {
    pub keywords: usize,
    pub communities: usize,
    pub top: Vec<NameScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmiOutput {
    pub a: String,
    pub b: String,
    pub papers: usize,
    pub co_occurrences: u64,
    /// Absent when the keywords never co-occur (negative infinity).
    pub pmi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkScore {
    pub a: String,
    pub b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinksOutput {
    pub graph: String,
    pub nodes: usize,
    pub edges: usize,
    pub links: Vec<LinkScore>,
}

fn int_param(call: &ToolCall, name: &str) -> Option<i64> {
    call.params.get(name).and_then(Value::as_i64)
}

fn count_param(call: &ToolCall, name: &str, default: usize) -> usize {
    int_param(call, name).map_or(default, |v| v.max(1) as usize)
}

fn text_param<'c>(call: &'c ToolCall, name: &str) -> &'c str {
    call.params.get(name).and_then(Value::as_str).unwrap_or_default()
}

fn graph_param<'c>(call: &'c ToolCall, default: &'c str) -> &'c str {
    call.params.get("graph").and_then(Value::as_str).unwrap_or(default)
}

fn paper_score(artifacts: &Artifacts, uid: &str, score: f64) -> PaperScore {
    let (title, year) = artifacts.store.get(uid).map_or((String::new(), 0), |r| (r.title.clone(), r.year));
    PaperScore { uid: uid.to_string(), title, year, score }
}

fn select_graph(artifacts: &Artifacts, name: &str) -> WeightedGraph {
    match name {
        "keyword" => artifacts.bkg.keyword_cooccurrence(),
        _ => artifacts.bkg.coauthor_projection(),
    }
}

fn envelope<T: Serialize>(call: &ToolCall, params: Value, result: &T, provenance: Provenance) -> ToolResult {
    let params = match params {
        Value::Object(map) => map,
        _ => Map::new(),
    };
    ToolResult {
        tool: call.tool.clone(),
        params,
        result: serde_json::to_value(result).expect("tool outputs serialize"),
        provenance,
    }
}

/// Executes a validated call. Precondition failures (unknown topic, unknown
/// paper, empty graph) come back as [`ToolError`] messages for the user.
pub fn run_tool(call: &ToolCall, ctx: &ToolContext<'_>) -> Result<ToolResult, ToolError> {
    let fail = |message: String| ToolError { tool: call.tool.clone(), message };
    call.validate().map_err(fail)?;
    let a = ctx.artifacts;
    let base = &a.params;
    match call.tool.as_str() {
        "fit_topics" => {
            let requested_k = int_param(call, "k").map(|k| k as usize);
            let threshold = call.params.get("outlier_threshold").and_then(Value::as_f64);
            let n = a.index.len();
            let params = MiningParams {
                k: requested_k,
                outlier_threshold: threshold.unwrap_or(base.outlier_threshold),
                ..base.clone()
            };
            let refit;
            let model = if requested_k.is_some() || threshold.is_some() {
                let mut m = fit_topics(a.index.entries(), &params).map_err(|e| fail(e.to_string()))?;
                m.attach_terms(&a.store, params.m_terms);
                refit = m;
                &refit
            } else {
                &a.model
            };
            let out = TopicsOutput {
                papers: model.paper_count(),
                outliers: model.outlier_count,
                iterations: model.iterations,
                converged: model.converged,
                topics: (0..model.k)
                    .map(|t| TopicSummary {
                        id: t as i64,
                        size: model.sizes[t],
                        terms: model.terms[t].iter().take(5).map(|r| r.item.clone()).collect(),
                    })
                    .collect(),
            };
            let k_used = params.k.unwrap_or_else(|| default_topic_count(n)).min(n);
            let prov = Provenance::default()
                .count("papers", out.papers)
                .count("topics", out.topics.len())
                .count("outliers", out.outliers)
                .threshold("outlier_threshold", params.outlier_threshold);
            Ok(envelope(call, json!({ "k": k_used, "outlier_threshold": params.outlier_threshold }), &out, prov))
        }
        "topic" => {
            let topic = int_param(call, "topic_id").unwrap_or(OUTLIER);
            let k = count_param(call, "k", 5);
            let size = a.model.size(topic).ok_or_else(|| fail(format!("unknown topic {topic}")))?;
            let (terms, reps) = if topic == OUTLIER {
                (Vec::new(), Vec::new())
            } else {
                let reps = representatives(&a.model, &a.index, topic, k).map_err(|e| fail(e.to_string()))?;
                let terms = a.model.terms[topic as usize]
                    .iter()
                    .map(|r| TermScore { term: r.item.clone(), score: r.score })
                    .collect();
                (terms, reps.iter().map(|r| paper_score(a, &r.item, r.score)).collect())
            };
            let out = TopicOutput { topic_id: topic, size, terms, representatives: reps };
            let prov = Provenance::default()
                .count("size", size)
                .count("representatives", out.representatives.len())
                .threshold("outlier_threshold", a.model.outlier_threshold);
            Ok(envelope(call, json!({ "topic_id": topic, "k": k }), &out, prov))
        }
        "topic_trend" => {
            let topic = int_param(call, "topic_id").unwrap_or(OUTLIER);
            let trend = topic_trend(&a.model, &a.store, topic).map_err(|e| fail(e.to_string()))?;
            let out = TrendOutput {
                topic_id: topic,
                members: trend.values().sum(),
                trend: trend.into_iter().map(|(year, count)| YearCount { year, count }).collect(),
            };
            let prov = Provenance::default().count("members", out.members).count("years", out.trend.len());
            Ok(envelope(call, json!({ "topic_id": topic }), &out, prov))
        }
        "recommend_similar" => {
            let uid = text_param(call, "uid").trim();
            let k = count_param(call, "k", 5);
            let ranked = recommend_similar(&a.bkg, &a.index, uid, k).map_err(|e| fail(e.to_string()))?;
            let out = SimilarOutput {
                uid: uid.to_string(),
                candidates: a.index.len().saturating_sub(1),
                recommendations: ranked.iter().map(|r| paper_score(a, &r.item, r.score)).collect(),
            };
            let prov = Provenance::default()
                .count("candidates", out.candidates)
                .count("returned", out.recommendations.len())
                .threshold("text_weight", 0.5)
                .threshold("coupling_weight", 0.5);
            Ok(envelope(call, json!({ "uid": uid, "k": k }), &out, prov))
        }
        "pagerank" => {
            let params = MiningParams {
                damping: call.params.get("damping").and_then(Value::as_f64).unwrap_or(base.damping),
                tol: call.params.get("tol").and_then(Value::as_f64).unwrap_or(base.tol),
                ..base.clone()
            };
            let k = count_param(call, "k", 10);
            let graph = a.bkg.citation_graph();
            let pr = pagerank(&graph, &params).map_err(|e| fail(e.to_string()))?;
            let top = crate::mining::RankedList::top_k(pr.scores.iter().map(|(id, s)| (id.key().to_string(), *s)), k);
            let out = PageRankOutput {
                papers: graph.node_count(),
                citations: graph.edge_count(),
                iterations: pr.iterations,
                converged: pr.converged,
                top: top.iter().map(|r| paper_score(a, &r.item, r.score)).collect(),
            };
            let prov = Provenance::default()
                .count("papers", out.papers)
                .count("citations", out.citations)
                .count("iterations", out.iterations)
                .threshold("damping", params.damping)
                .threshold("tol", params.tol);
            Ok(envelope(
                call,
                json!({ "damping": params.damping, "tol": params.tol, "max_iter": params.max_iter, "k": k }),
                &out,
                prov,
            ))
        }
        "coupling" => {
            let (x, y) = (text_param(call, "a").trim(), text_param(call, "b").trim());
            let out = CouplingOutput {
                a: x.to_string(),
                b: y.to_string(),
                coupling: biblio_coupling(&a.bkg, x, y).map_err(|e| fail(e.to_string()))?,
                co_citation: co_citation(&a.bkg, x, y).map_err(|e| fail(e.to_string()))?,
            };
            let prov = Provenance::default().count("coupling", out.coupling).count("co_citation", out.co_citation);
            Ok(envelope(call, json!({ "a": x, "b": y }), &out, prov))
        }
        "active_researchers" => {
            let k = count_param(call, "k", 10);
            let ranked = active_researchers(&a.bkg, k);
            let out = ResearchersOutput {
                authors: a.bkg.nodes_of(NodeKind::Author).count(),
                top: ranked.iter().map(|r| NameScore { name: r.item.clone(), score: r.score }).collect(),
            };
            let prov = Provenance::default().count("authors", out.authors).count("papers", a.store.len());
            Ok(envelope(call, json!({ "k": k }), &out, prov))
        }
        "communities" => {
            let graph_name = graph_param(call, "coauthor");
            let k = count_param(call, "k", 5);
            let graph = select_graph(a, graph_name);
            if graph.node_count() == 0 {
                return Err(fail(format!("the {graph_name} network is empty")));
            }
            let parts = communities(&graph, base.max_iter);
            let mut groups: Vec<Group> = parts
                .groups()
                .into_iter()
                .enumerate()
                .map(|(id, members)| Group {
                    id,
                    size: members.len(),
                    members: members.iter().take(5).map(|m| m.key().to_string()).collect(),
                })
                .collect();
            groups.sort_by(|x, y| y.size.cmp(&x.size).then(x.id.cmp(&y.id)));
            groups.truncate(k);
            let out = CommunitiesOutput {
                graph: graph_name.to_string(),
                nodes: graph.node_count(),
                edges: graph.edge_count(),
                count: parts.count,
                iterations: parts.iterations,
                converged: parts.converged,
                groups,
            };
            let prov = Provenance::default()
                .count("nodes", out.nodes)
                .count("edges", out.edges)
                .count("communities", out.count)
                .count("iterations", out.iterations);
            Ok(envelope(call, json!({ "graph": graph_name, "k": k, "max_iter": base.max_iter }), &out, prov))
        }
        "bridging_keywords" => {
            let k = count_param(call, "k", 10);
            let graph = a.bkg.keyword_cooccurrence();
            if graph.node_count() == 0 {
                return Err(fail("the papers carry no keywords".into()));
            }
            let ranked = bridging_keywords(&graph, k, base.max_iter);
            let out = BridgingOutput {
                keywords: graph.node_count(),
                communities: communities(&graph, base.max_iter).count,
                top: ranked.iter().map(|r| NameScore { name: r.item.clone(), score: r.score }).collect(),
            };
            let prov = Provenance::default().count("keywords", out.keywords).count("communities", out.communities);
            Ok(envelope(call, json!({ "k": k }), &out, prov))
        }
        "keyword_pmi" => {
            let (x, y) = (squash(text_param(call, "a")), squash(text_param(call, "b")));
            let (ka, kb) = (NodeId::keyword(&x), NodeId::keyword(&y));
            let graph = a.bkg.keyword_cooccurrence();
            let totals = keyword_totals(&a.bkg);
            let value = pmi(&graph, &totals, &ka, &kb).map_err(|e| fail(e.to_string()))?;
            let joint = if ka == kb { totals.occurrences[&ka] as u64 } else { graph.weight(&ka, &kb).unwrap_or(0) };
            let out = PmiOutput {
                a: x.clone(),
                b: y.clone(),
                papers: totals.papers,
                co_occurrences: joint,
                pmi: value.is_finite().then_some(value),
            };
            let prov = Provenance::default()
                .count("papers", out.papers)
                .count("co_occurrences", joint as usize)
                .count("occurrences_a", totals.occurrences[&ka])
                .count("occurrences_b", totals.occurrences[&kb]);
            Ok(envelope(call, json!({ "a": x, "b": y }), &out, prov))
        }
        "predict_links" => {
            let graph_name = graph_param(call, "keyword");
            let k = count_param(call, "k", 10);
            let graph = select_graph(a, graph_name);
            let ranked = predict_links(&graph, k).map_err(|e| fail(format!("the {graph_name} network: {e}")))?;
            let out = LinksOutput {
                graph: graph_name.to_string(),
                nodes: graph.node_count(),
                edges: graph.edge_count(),
                links: ranked
                    .iter()
                    .map(|r| LinkScore { a: r.item.0.key().to_string(), b: r.item.1.key().to_string(), score: r.score })
                    .collect(),
            };
            let prov = Provenance::default()
                .count("nodes", out.nodes)
                .count("edges", out.edges)
                .count("returned", out.links.len());
            Ok(envelope(call, json!({ "graph": graph_name, "k": k }), &out, prov))
        }
        "rag_answer" => {
            let question = text_param(call, "question");
            let k = count_param(call, "k", RAG_K);
            let answer = rag_answer(ctx.provider, ctx.assets, ctx.embedder, &a.index, &a.store, question, k)
                .map_err(|e| fail(e.to_string()))?;
            let prov = Provenance::default()
                .count("retrieved", answer.retrieved.len())
                .count("cited", answer.cited.len())
                .count("stripped", answer.stripped.len());
            Ok(envelope(call, json!({ "question": question.trim(), "k": k }), &answer, prov))
        }
        other => Err(fail(format!("unknown tool `{other}`"))),
    }
}
