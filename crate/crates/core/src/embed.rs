//! Embedding provider contract, the deterministic hashing stub, cosine
//! similarity and exact nearest-neighbour search.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusStore, MetadataRecord};
use crate::text::tokenize;

pub const STUB_DIMENSION: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("text contains no tokens")]
    EmptyText,
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no vectors to search")]
    EmptyMatrix,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate uid `{0}` in embedding index")]
    DuplicateUid(String),
    #[error("embedding provider failed: {0}")]
    Provider(String),
}

/// A unit-norm dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalizes `components`. Zero and non-finite vectors are rejected.
    pub fn normalized(components: Vec<f64>) -> Result<EmbeddingVector, EmbedError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroVector);
        }
        Ok(EmbeddingVector(components.into_iter().map(|c| c / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = EmbedError;

    fn try_from(components: Vec<f64>) -> Result<Self, Self::Error> {
        EmbeddingVector::normalized(components)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Vec<f64> {
        v.0
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// One vector per input text, all of [`dimension`](Self::dimension) components.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
    fn dimension(&self) -> usize;
    fn name(&self) -> &str;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, b| (hash ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Feature-hashing embedding: each token adds ±1 at `fnv1a64(token) mod 64`,
/// negative when bit 63 of the hash is set.
pub fn stub_embed(text: &str) -> Result<EmbeddingVector, EmbedError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut acc = vec![0.0; STUB_DIMENSION];
    for token in &tokens {
        let h = fnv1a64(token.as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        acc[(h % STUB_DIMENSION as u64) as usize] += sign;
    }
    EmbeddingVector::normalized(acc)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubEmbedder;

impl EmbeddingProvider for StubEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| stub_embed(t)).collect()
    }

    fn dimension(&self) -> usize {
        STUB_DIMENSION
    }

    fn name(&self) -> &str {
        "stub-fnv1a-64"
    }
}

pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dimension() != v.dimension() {
        return Err(EmbedError::DimensionMismatch { expected: u.dimension(), found: v.dimension() });
    }
    Ok(dot(u.as_slice(), v.as_slice()))
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Descending score, then ascending id.
pub(crate) fn ranked_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Exact k nearest neighbours by cosine. Returns `min(k, N)` entries.
pub fn knn(
    matrix: &[(String, EmbeddingVector)],
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(String, f64)>, EmbedError> {
    if matrix.is_empty() {
        return Err(EmbedError::EmptyMatrix);
    }
    if k == 0 {
        return Err(EmbedError::InvalidK);
    }
    let mut scored = matrix
        .iter()
        .map(|(uid, v)| Ok((uid.clone(), cosine(query, v)?)))
        .collect::<Result<Vec<_>, EmbedError>>()?;
    scored.sort_by(ranked_order);
    scored.truncate(k);
    Ok(scored)
}

/// Immutable uid-ordered set of paper embeddings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    provider: String,
    entries: Vec<(String, EmbeddingVector)>,
}

impl EmbeddingIndex {
    pub fn new(provider: &str, mut entries: Vec<(String, EmbeddingVector)>) -> Result<EmbeddingIndex, EmbedError> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(pair) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(EmbedError::DuplicateUid(pair[0].0.clone()));
        }
        if let Some((_, first)) = entries.first() {
            let dim = first.dimension();
            if let Some((_, bad)) = entries.iter().find(|(_, v)| v.dimension() != dim) {
                return Err(EmbedError::DimensionMismatch { expected: dim, found: bad.dimension() });
            }
        }
        Ok(EmbeddingIndex { provider: provider.to_string(), entries })
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn entries(&self) -> &[(String, EmbeddingVector)] {
        &self.entries
    }

    pub fn get(&self, uid: &str) -> Option<&EmbeddingVector> {
        self.entries.binary_search_by(|(u, _)| u.as_str().cmp(uid)).ok().map(|i| &self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn knn(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(String, f64)>, EmbedError> {
        knn(&self.entries, query, k)
    }

    pub fn as_map(&self) -> BTreeMap<&str, &EmbeddingVector> {
        self.entries.iter().map(|(u, v)| (u.as_str(), v)).collect()
    }
}

/// Text embedded for a paper: title, abstract and keywords.
pub fn paper_text(record: &MetadataRecord) -> String {
    let mut text = record.title.clone();
    if !record.abstract_text.is_empty() {
        text.push('\n');
        text.push_str(&record.abstract_text);
    }
    if !record.keywords.is_empty() {
        text.push('\n');
        text.push_str(&record.keywords.join("; "));
    }
    text
}

/// Result of embedding a corpus: the index plus uids that could not be embedded.
#[derive(Debug, Clone)]
pub struct CorpusEmbedding {
    pub index: EmbeddingIndex,
    pub skipped: Vec<String>,
}

/// Embeds every record in batches. A failing batch is retried one text at a
/// time so a single degenerate text only skips its own paper.
pub fn embed_corpus(
    provider: &dyn EmbeddingProvider,
    store: &CorpusStore,
    batch_size: usize,
) -> Result<CorpusEmbedding, EmbedError> {
    let records: Vec<&MetadataRecord> = store.records().collect();
    let mut entries = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for chunk in records.chunks(batch_size.max(1)) {
        let texts: Vec<String> = chunk.iter().map(|r| paper_text(r)).collect();
        match provider.embed_batch(&texts) {
            Ok(vectors) if vectors.len() == chunk.len() => {
                entries.extend(chunk.iter().map(|r| r.uid.clone()).zip(vectors));
            }
            Ok(vectors) => {
                return Err(EmbedError::Provider(format!(
                    "provider returned {} vectors for {} texts",
                    vectors.len(),
                    chunk.len()
                )))
            }
            Err(EmbedError::Provider(msg)) => return Err(EmbedError::Provider(msg)),
            Err(_) => {
                for (record, text) in chunk.iter().zip(texts) {
                    match provider.embed_batch(std::slice::from_ref(&text)) {
                        Ok(mut v) if v.len() == 1 => entries.push((record.uid.clone(), v.remove(0))),
                        Ok(_) | Err(EmbedError::EmptyText | EmbedError::ZeroVector | EmbedError::NonFinite) => {
                            skipped.push(record.uid.clone())
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    Ok(CorpusEmbedding { index: EmbeddingIndex::new(provider.name(), entries)?, skipped })
}
