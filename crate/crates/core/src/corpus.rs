//! Scholarly metadata records: parsing, author-name canonicalization,
//! deduplicating ingest and an immutable in-memory store.
//!
//! The wire format is JSON Lines, one object per line:
//!
//! ```text
//! {"uid": str, "title": str, "abstract": str?, "authors": [{"name": str, "institution": str?}],
//!  "venue": str?, "year": int, "doi": str?, "keywords": [str]?, "references": [str]?}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::squash;

pub const MIN_YEAR: i64 = 1800;
pub const MAX_YEAR: i64 = 2100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    #[default]
    Local,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRef {
    pub raw_name: String,
    /// Lowercase `family, g.` form; see [`normalize_name`].
    pub canonical_name: String,
    pub institution: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub uid: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub authors: Vec<AuthorRef>,
    pub venue: String,
    pub year: i32,
    pub doi: Option<String>,
    pub keywords: Vec<String>,
    pub references: Vec<String>,
    pub source: RecordSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("year {0} outside [{MIN_YEAR}, {MAX_YEAR}]")]
    YearOutOfRange(i64),
    #[error("invalid author: {0}")]
    InvalidAuthor(#[from] NameError),
}

impl RecordError {
    /// Stable category key used in ingest statistics.
    pub fn category(&self) -> &'static str {
        match self {
            RecordError::Malformed(_) => "malformed_json",
            RecordError::MissingField(_) => "missing_field",
            RecordError::YearOutOfRange(_) => "year_out_of_range",
            RecordError::InvalidAuthor(_) => "invalid_author",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("empty author name")]
    Empty,
}

#[derive(Deserialize)]
struct WireAuthor {
    name: String,
    #[serde(default)]
    institution: Option<String>,
}

#[derive(Deserialize)]
struct WireRecord {
    uid: Option<String>,
    title: Option<String>,
    #[serde(rename = "abstract", default)]
    abstract_text: Option<String>,
    #[serde(default)]
    authors: Option<Vec<WireAuthor>>,
    #[serde(default)]
    venue: Option<String>,
    year: Option<i64>,
    #[serde(default)]
    doi: Option<String>,
    #[serde(default)]
    keywords: Option<Vec<String>>,
    #[serde(default)]
    references: Option<Vec<String>>,
}

#[derive(Serialize)]
struct WireAuthorOut<'a> {
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    institution: Option<&'a str>,
}

#[derive(Serialize)]
struct WireRecordOut<'a> {
    uid: &'a str,
    title: &'a str,
    #[serde(rename = "abstract")]
    abstract_text: &'a str,
    authors: Vec<WireAuthorOut<'a>>,
    venue: &'a str,
    year: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    doi: Option<&'a str>,
    keywords: &'a [String],
    references: &'a [String],
}

/// Canonicalizes an author name to lowercase `family, i. i.` form.
///
/// `Family, Given` is split at the first comma; otherwise the last
/// whitespace-separated token is the family name. Given names are reduced to
/// initials. Particles in the uncommaed form ("Vincent van Gogh") are treated
/// as given names.
pub fn normalize_name(raw: &str) -> Result<String, NameError> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(NameError::Empty);
    }
    let (family, given) = match collapsed.split_once(',') {
        Some((family, given)) => (family.trim().to_string(), given.trim().to_string()),
        None => {
            let mut parts: Vec<&str> = collapsed.split(' ').collect();
            let family = parts.pop().unwrap_or_default().to_string();
            (family, parts.join(" "))
        }
    };
    let family = squash(&family);
    if family.is_empty() {
        return Err(NameError::Empty);
    }
    let initials: Vec<String> = given
        .split(|c: char| c.is_whitespace() || c == '.')
        .filter_map(|piece| piece.chars().find(|c| c.is_alphanumeric()))
        .map(|c| format!("{}.", c.to_lowercase()))
        .collect();
    if initials.is_empty() {
        Ok(family)
    } else {
        Ok(format!("{}, {}", family, initials.join(" ")))
    }
}

fn non_blank(value: Option<String>) -> Option<String> {
    value.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

/// Parses one JSON Lines record, applying defaults and normalization.
pub fn parse_record(line: &str) -> Result<MetadataRecord, RecordError> {
    let wire: WireRecord =
        serde_json::from_str(line).map_err(|e| RecordError::Malformed(e.to_string()))?;
    let uid = wire.uid.filter(|u| !u.is_empty()).ok_or(RecordError::MissingField("uid"))?;
    let title = wire
        .title
        .filter(|t| !t.trim().is_empty())
        .ok_or(RecordError::MissingField("title"))?;
    let year = wire.year.ok_or(RecordError::MissingField("year"))?;
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(RecordError::YearOutOfRange(year));
    }

    let mut authors = Vec::new();
    for author in wire.authors.unwrap_or_default() {
        authors.push(AuthorRef {
            canonical_name: normalize_name(&author.name)?,
            raw_name: author.name,
            institution: non_blank(author.institution),
        });
    }

    let mut seen = HashSet::new();
    let keywords = wire
        .keywords
        .unwrap_or_default()
        .iter()
        .map(|k| squash(k))
        .filter(|k| !k.is_empty() && seen.insert(k.clone()))
        .collect();

    let mut seen = HashSet::new();
    let references = wire
        .references
        .unwrap_or_default()
        .into_iter()
        .filter(|r| !r.is_empty() && *r != uid && seen.insert(r.clone()))
        .collect();

    Ok(MetadataRecord {
        uid,
        title,
        abstract_text: wire.abstract_text.unwrap_or_default(),
        authors,
        venue: wire.venue.unwrap_or_default(),
        year: year as i32,
        doi: non_blank(wire.doi),
        keywords,
        references,
        source: RecordSource::Local,
    })
}

/// Renders a record back to its JSON Lines form.
pub fn serialize_record(record: &MetadataRecord) -> String {
    let out = WireRecordOut {
        uid: &record.uid,
        title: &record.title,
        abstract_text: &record.abstract_text,
        authors: record
            .authors
            .iter()
            .map(|a| WireAuthorOut { name: &a.raw_name, institution: a.institution.as_deref() })
            .collect(),
        venue: &record.venue,
        year: record.year,
        doi: record.doi.as_deref(),
        keywords: &record.keywords,
        references: &record.references,
    };
    serde_json::to_string(&out).expect("record serialization is infallible")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub accepted: usize,
    pub rejected: usize,
    pub deduplicated: usize,
    /// Rejections keyed by [`RecordError::category`].
    pub rejected_by_category: BTreeMap<String, usize>,
}

impl IngestStats {
    pub fn total(&self) -> usize {
        self.accepted + self.rejected + self.deduplicated
    }
}

/// Immutable uid-keyed record store. uids are case-sensitive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStore {
    records: BTreeMap<String, MetadataRecord>,
    stats: IngestStats,
}

impl CorpusStore {
    /// Ingests JSON Lines. Every line counts towards exactly one of
    /// accepted, rejected or deduplicated; the first record for a uid wins.
    pub fn ingest<I, S>(lines: I) -> CorpusStore
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut store = CorpusStore::default();
        for line in lines {
            match parse_record(line.as_ref()) {
                Ok(record) => store.insert(record),
                Err(err) => {
                    tracing::debug!(error = %err, "rejected corpus line");
                    store.stats.rejected += 1;
                    *store.stats.rejected_by_category.entry(err.category().to_string()).or_default() += 1;
                }
            }
        }
        store
    }

    pub fn ingest_reader<R: BufRead>(reader: R) -> std::io::Result<CorpusStore> {
        let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
        Ok(CorpusStore::ingest(lines))
    }

    /// Builds a store from already-parsed records (first occurrence wins).
    pub fn from_records<I: IntoIterator<Item = MetadataRecord>>(records: I) -> CorpusStore {
        let mut store = CorpusStore::default();
        for record in records {
            store.insert(record);
        }
        store
    }

    fn insert(&mut self, record: MetadataRecord) {
        if self.records.contains_key(&record.uid) {
            self.stats.deduplicated += 1;
        } else {
            self.stats.accepted += 1;
            self.records.insert(record.uid.clone(), record);
        }
    }

    pub fn get(&self, uid: &str) -> Option<&MetadataRecord> {
        self.records.get(uid)
    }

    pub fn contains(&self, uid: &str) -> bool {
        self.records.contains_key(uid)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in uid order.
    pub fn records(&self) -> impl Iterator<Item = &MetadataRecord> {
        self.records.values()
    }

    pub fn uids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    /// A new store holding only the given uids (unknown uids are ignored).
    pub fn subset<'a, I: IntoIterator<Item = &'a str>>(&self, uids: I) -> CorpusStore {
        CorpusStore::from_records(uids.into_iter().filter_map(|u| self.records.get(u).cloned()))
    }

    /// SHA-256 over the serialized records in uid order.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for record in self.records.values() {
            hasher.update(serialize_record(record).as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Exact-match lookup; absence is a value, not an error.
pub fn get_record<'a>(store: &'a CorpusStore, uid: &str) -> Option<&'a MetadataRecord> {
    store.get(uid)
}
