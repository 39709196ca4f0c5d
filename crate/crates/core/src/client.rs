//! Scholarly database access behind a narrow contract. The local client
//! answers queries from an in-memory corpus; remote indexes plug in behind
//! the same trait.

use std::sync::Arc;

use thiserror::Error;

use crate::corpus::{CorpusStore, MetadataRecord};
use crate::querylang::{search, Query};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("database unavailable: {0}")]
    Unavailable(String),
}

pub trait ScholarlyDatabaseClient: Send + Sync {
    /// Records matching `query`, newest first, ties by uid.
    fn search(&self, query: &Query) -> Result<Vec<MetadataRecord>, ClientError>;
    fn name(&self) -> &str;
}

#[derive(Debug, Clone)]
pub struct LocalCorpusClient {
    store: Arc<CorpusStore>,
}

impl LocalCorpusClient {
    pub fn new(store: Arc<CorpusStore>) -> LocalCorpusClient {
        LocalCorpusClient { store }
    }

    pub fn store(&self) -> &Arc<CorpusStore> {
        &self.store
    }
}

impl ScholarlyDatabaseClient for LocalCorpusClient {
    fn search(&self, query: &Query) -> Result<Vec<MetadataRecord>, ClientError> {
        Ok(search(query, &self.store).iter().filter_map(|uid| self.store.get(uid).cloned()).collect())
    }

    fn name(&self) -> &str {
        "local-corpus"
    }
}
