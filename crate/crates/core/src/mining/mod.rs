//! Deterministic mining tools over the knowledge graph and paper embeddings.
//!
//! Every ranked output uses a total order (score, then id) so results are
//! reproducible bit-for-bit; no algorithm here draws random numbers.

mod citations;
mod network;
mod topics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbedError;

pub use citations::{biblio_coupling, co_citation, pagerank, recommend_similar, PageRank};
pub use network::{
    active_researchers, bridging_keywords, communities, keyword_totals, pmi, predict_links, Communities,
    KeywordTotals,
};
pub use topics::{
    ctfidf_terms, default_topic_count, fit_topics, project_2d, representatives, topic_documents, topic_trend, Projection, TopicModel,
    OUTLIER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    /// Topic count; `None` means `max(2, round(sqrt(N / 2)))`.
    pub k: Option<usize>,
    /// Papers whose cosine to their nearest centroid falls below this are outliers.
    pub outlier_threshold: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub m_terms: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams { k: None, outlier_threshold: 0.10, damping: 0.85, tol: 1e-9, max_iter: 100, m_terms: 10 }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<(), MiningError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(MiningError::InvalidParams(format!("damping {} not in (0, 1)", self.damping)));
        }
        if !(-1.0..1.0).contains(&self.outlier_threshold) {
            return Err(MiningError::InvalidParams(format!(
                "outlier threshold {} not in [-1, 1)",
                self.outlier_threshold
            )));
        }
        if !(self.tol > 0.0) {
            return Err(MiningError::InvalidParams(format!("tolerance {} must be positive", self.tol)));
        }
        if self.k == Some(0) {
            return Err(MiningError::InvalidParams("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(MiningError::InvalidParams("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiningError {
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("unknown topic {0}")]
    UnknownTopic(i64),
    #[error("the outlier class has no centroid")]
    OutlierTopic,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("graph has no edges")]
    EdgelessGraph,
    #[error("unknown paper `{0}`")]
    UnknownPaper(String),
    #[error("paper `{0}` has no embedding")]
    NotEmbedded(String),
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked<T> {
    pub item: T,
    pub score: f64,
}

/// Scores non-increasing; ties in ascending item order unless a tool
/// documents another tie-break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList<T>(Vec<Ranked<T>>);

impl<T: Ord> RankedList<T> {
    pub fn top_k(scored: impl IntoIterator<Item = (T, f64)>, k: usize) -> RankedList<T> {
        let mut items: Vec<Ranked<T>> = scored.into_iter().map(|(item, score)| Ranked { item, score }).collect();
        items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.item.cmp(&b.item)));
        items.truncate(k);
        RankedList(items)
    }
}

impl<T> RankedList<T> {
    /// Caller guarantees the order.
    pub(crate) fn from_sorted(items: Vec<Ranked<T>>) -> RankedList<T> {
        RankedList(items)
    }

    pub fn items(&self) -> &[Ranked<T>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Ranked<T>> {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranked_list_order() {
        let list = RankedList::top_k([("b", 1.0), ("a", 1.0), ("c", 2.0)], 10);
        let items: Vec<_> = list.iter().map(|r| r.item).collect();
        assert_eq!(items, vec!["c", "a", "b"]);
        assert_eq!(RankedList::top_k([("b", 1.0), ("a", 1.0)], 1).items()[0].item, "a");
    }

    #[test]
    fn params_validation() {
        assert!(MiningParams::default().validate().is_ok());
        for bad in [
            MiningParams { damping: 1.0, ..Default::default() },
            MiningParams { damping: 0.0, ..Default::default() },
            MiningParams { outlier_threshold: 1.0, ..Default::default() },
            MiningParams { tol: 0.0, ..Default::default() },
            MiningParams { k: Some(0), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(MiningError::InvalidParams(_))));
        }
    }
}
