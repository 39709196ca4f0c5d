use serde_json::json;
use thiserror::Error;

use crate::bkg::{build_bkg, Bkg};
use crate::corpus::{CorpusStore, MetadataRecord};
use crate::embed::{embed_corpus, EmbedError, EmbeddingIndex, EmbeddingProvider};
use crate::mining::{fit_topics, MiningError, MiningParams, TopicModel};

use super::templates::sha256_hex;

pub const EMBED_BATCH: usize = 32;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("no approved query")]
    NoQuery,
    #[error("database search failed: {0}")]
    Database(String),
    #[error("the query matched {found} papers; at least 2 are needed to analyze a collection")]
    TooFewPapers { found: usize },
    #[error("only {found} papers could be embedded; at least 2 are needed")]
    TooFewEmbedded { found: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Mining(#[from] MiningError),
}

/// Everything derived from one retrieval. Immutable once built and shared
/// by reference between requests.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub store: CorpusStore,
    pub bkg: Bkg,
    pub index: EmbeddingIndex,
    /// Papers whose text could not be embedded.
    pub skipped: Vec<String>,
    pub model: TopicModel,
    pub params: MiningParams,
    key: String,
}

impl Artifacts {
    pub fn build(
        records: Vec<MetadataRecord>,
        embedder: &dyn EmbeddingProvider,
        params: &MiningParams,
    ) -> Result<Artifacts, ArtifactError> {
        let store = CorpusStore::from_records(records);
        if store.len() < 2 {
            return Err(ArtifactError::TooFewPapers { found: store.len() });
        }
        let embedded = embed_corpus(embedder, &store, EMBED_BATCH)?;
        if embedded.index.len() < 2 {
            return Err(ArtifactError::TooFewEmbedded { found: embedded.index.len() });
        }
        let bkg = build_bkg(&store).with_embeddings(&embedded.index);
        let mut model = fit_topics(embedded.index.entries(), params)?;
        model.attach_terms(&store, params.m_terms);
        let key = artifact_key(&store, embedder.name(), params);
        Ok(Artifacts { store, bkg, index: embedded.index, skipped: embedded.skipped, model, params: params.clone(), key })
    }

    /// Content hash of the inputs: corpus, embedding provider and parameters.
    pub fn key(&self) -> &str {
        &self.key
    }
}

pub fn artifact_key(store: &CorpusStore, embedder: &str, params: &MiningParams) -> String {
    sha256_hex(&json!({ "corpus": store.fingerprint(), "embedder": embedder, "params": params }).to_string())
}
