//! Template-only response composition. Every number in a reply comes from a
//! tool envelope; no provider is involved.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use thiserror::Error;

use super::rag::RagAnswer;
use super::templates::{TemplateError, TemplateSet, PROVENANCE_SLOT};
use super::tools::{
    tool_spec, BridgingOutput, CommunitiesOutput, CouplingOutput, LinksOutput, PageRankOutput, PaperScore,
    PmiOutput, Provenance, ResearchersOutput, SimilarOutput, ToolResult, TopicOutput, TopicsOutput, TrendOutput,
};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("result of `{tool}` does not match its output shape: {message}")]
    Malformed { tool: String, message: String },
    #[error("no results to compose")]
    Empty,
}

fn score(x: f64) -> String {
    format!("{x:.4}")
}

fn list_or_none(lines: Vec<String>) -> String {
    if lines.is_empty() {
        "- none".into()
    } else {
        lines.join("\n")
    }
}

fn papers(list: &[PaperScore]) -> String {
    list_or_none(list.iter().map(|p| format!("- [{}] {} ({}), score {}", p.uid, p.title, p.year, score(p.score))).collect())
}

pub fn render_provenance(tool: &str, p: &Provenance) -> String {
    let counts: Vec<String> = p.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let thresholds: Vec<String> = p.thresholds.iter().map(|(k, v)| format!("{k}={v:?}")).collect();
    format!(
        "Provenance: tool={tool}; counts: {}; thresholds: {}",
        if counts.is_empty() { "none".into() } else { counts.join(", ") },
        if thresholds.is_empty() { "none".into() } else { thresholds.join(", ") }
    )
}

fn output<T: DeserializeOwned>(r: &ToolResult) -> Result<T, ComposeError> {
    serde_json::from_value(r.result.clone())
        .map_err(|e| ComposeError::Malformed { tool: r.tool.clone(), message: e.to_string() })
}

fn slot_values(r: &ToolResult) -> Result<BTreeMap<&'static str, String>, ComposeError> {
    let mut v: BTreeMap<&'static str, String> = BTreeMap::new();
    match r.tool.as_str() {
        "fit_topics" => {
            let o: TopicsOutput = output(r)?;
            v.insert("papers", o.papers.to_string());
            v.insert("topic_count", o.topics.len().to_string());
            v.insert("outliers", o.outliers.to_string());
            let lines = o
                .topics
                .iter()
                .map(|t| format!("- Topic {} ({} papers): {}", t.id, t.size, t.terms.join(", ")))
                .collect();
            v.insert("topic_lines", list_or_none(lines));
        }
        "topic" => {
            let o: TopicOutput = output(r)?;
            v.insert("topic_id", o.topic_id.to_string());
            v.insert("size", o.size.to_string());
            let terms: Vec<&str> = o.terms.iter().take(10).map(|t| t.term.as_str()).collect();
            v.insert("terms", if terms.is_empty() { "none".into() } else { terms.join(", ") });
            v.insert("representatives", papers(&o.representatives));
        }
        "topic_trend" => {
            let o: TrendOutput = output(r)?;
            v.insert("topic_id", o.topic_id.to_string());
            v.insert("members", o.members.to_string());
            let first = o.trend.first().map_or("-".to_string(), |y| y.year.to_string());
            let last = o.trend.last().map_or("-".to_string(), |y| y.year.to_string());
            v.insert("first_year", first);
            v.insert("last_year", last);
            v.insert("years", list_or_none(o.trend.iter().map(|y| format!("- {}: {}", y.year, y.count)).collect()));
        }
        "recommend_similar" => {
            let o: SimilarOutput = output(r)?;
            v.insert("uid", o.uid);
            v.insert("candidates", o.candidates.to_string());
            v.insert("recommendations", papers(&o.recommendations));
        }
        "pagerank" => {
            let o: PageRankOutput = output(r)?;
            v.insert("papers", o.papers.to_string());
            v.insert("citations", o.citations.to_string());
            v.insert("iterations", o.iterations.to_string());
            v.insert("ranking", papers(&o.top));
        }
        "coupling" => {
            let o: CouplingOutput = output(r)?;
            v.insert("a", o.a);
            v.insert("b", o.b);
            v.insert("coupling", o.coupling.to_string());
            v.insert("co_citation", o.co_citation.to_string());
        }
        "active_researchers" => {
            let o: ResearchersOutput = output(r)?;
            v.insert("authors", o.authors.to_string());
            v.insert("ranking", list_or_none(o.top.iter().map(|a| format!("- {}: {}", a.name, score(a.score))).collect()));
        }
        "communities" => {
            let o: CommunitiesOutput = output(r)?;
            v.insert("graph", o.graph);
            v.insert("nodes", o.nodes.to_string());
            v.insert("count", o.count.to_string());
            let lines = o
                .groups
                .iter()
                .map(|g| format!("- Group {} ({} members): {}", g.id, g.size, g.members.join(", ")))
                .collect();
            v.insert("groups", list_or_none(lines));
        }
        "bridging_keywords" => {
            let o: BridgingOutput = output(r)?;
            v.insert("communities", o.communities.to_string());
            let lines = o.top.iter().map(|k| format!("- {}: touches {} communities", k.name, k.score)).collect();
            v.insert("ranking", list_or_none(lines));
        }
        "keyword_pmi" => {
            let o: PmiOutput = output(r)?;
            v.insert("a", o.a);
            v.insert("b", o.b);
            v.insert("co_occurrences", o.co_occurrences.to_string());
            v.insert("papers", o.papers.to_string());
            v.insert("pmi", o.pmi.map_or("undefined (never together)".into(), score));
        }
        "predict_links" => {
            let o: LinksOutput = output(r)?;
            v.insert("graph", o.graph);
            v.insert("nodes", o.nodes.to_string());
            v.insert("edges", o.edges.to_string());
            let lines = o.links.iter().map(|l| format!("- {} + {}: {}", l.a, l.b, score(l.score))).collect();
            v.insert("links", list_or_none(lines));
        }
        "rag_answer" => {
            let o: RagAnswer = output(r)?;
            v.insert("answer", o.answer);
            v.insert("retrieved", o.retrieved.len().to_string());
            let flags = if o.stripped.is_empty() {
                String::new()
            } else {
                format!(" Removed {} citation(s) to papers that were not retrieved: {}.", o.stripped.len(), o.stripped.join(", "))
            };
            v.insert("flags", flags);
        }
        other => return Err(TemplateError::Missing(other.to_string()).into()),
    }
    v.insert(PROVENANCE_SLOT, render_provenance(&r.tool, &r.provenance));
    Ok(v)
}

/// One section per result, in registry order, separated by blank lines.
pub fn compose_response(templates: &TemplateSet, results: &[ToolResult]) -> Result<String, ComposeError> {
    if results.is_empty() {
        return Err(ComposeError::Empty);
    }
    let mut ordered: Vec<&ToolResult> = results.iter().collect();
    ordered.sort_by_key(|r| tool_spec(&r.tool).map_or(usize::MAX, |(i, _)| i));
    let sections = ordered
        .into_iter()
        .map(|r| Ok(templates.render(&r.tool, &slot_values(r)?)?))
        .collect::<Result<Vec<_>, ComposeError>>()?;
    Ok(sections.join("\n\n"))
}

#[cfg(test)]
mod tests {
    use serde_json::{json, Map};

    use super::*;
    use crate::agent::templates::Assets;
    use crate::agent::tools::TopicSummary;

    fn topics_result() -> ToolResult {
        let out = TopicsOutput {
            papers: 22,
            outliers: 3,
            iterations: 2,
            converged: true,
            topics: vec![
                TopicSummary { id: 0, size: 12, terms: vec!["triage".into()] },
                TopicSummary { id: 1, size: 7, terms: vec!["speech".into()] },
            ],
        };
        ToolResult {
            tool: "fit_topics".into(),
            params: Map::new(),
            result: serde_json::to_value(out).unwrap(),
            provenance: Provenance {
                counts: [("outliers".to_string(), 3)].into(),
                thresholds: [("outlier_threshold".to_string(), 0.1)].into(),
            },
        }
    }

    #[test]
    fn sizes_and_outliers_are_stated() {
        let text = compose_response(&Assets::builtin().responses, &[topics_result()]).unwrap();
        assert!(text.contains("(12 papers)"));
        assert!(text.contains("(7 papers)"));
        assert!(text.contains("3 outliers"));
        assert!(text.contains("outlier_threshold=0.1"));
        assert!(text.contains("Next:"));
    }

    #[test]
    fn sections_follow_registry_order() {
        let trend = ToolResult {
            tool: "topic_trend".into(),
            params: Map::new(),
            result: json!({ "topic_id": 0, "members": 2, "trend": [{ "year": 2020, "count": 2 }] }),
            provenance: Provenance::default(),
        };
        let text = compose_response(&Assets::builtin().responses, &[trend, topics_result()]).unwrap();
        let topics_at = text.find("form 2 topics").unwrap();
        let trend_at = text.find("Topic 0 has 2 papers").unwrap();
        assert!(topics_at < trend_at);
        assert_eq!(text.matches("Provenance:").count(), 2);
    }

    #[test]
    fn missing_template_and_bad_shape_error() {
        let mut r = topics_result();
        r.tool = "fit_topics".into();
        let empty = TemplateSet::default();
        assert!(matches!(compose_response(&empty, &[r.clone()]), Err(ComposeError::Template(TemplateError::Missing(_)))));
        r.result = json!({ "papers": "many" });
        assert!(matches!(compose_response(&Assets::builtin().responses, &[r]), Err(ComposeError::Malformed { .. })));
        assert!(matches!(compose_response(&Assets::builtin().responses, &[]), Err(ComposeError::Empty)));
    }
}
