//! Prompt and response templates with `{{slot}}` placeholders, plus the
//! in-context exemplars. Every file is checksummed so sessions can record
//! exactly which wording produced them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::querylang::parse_query;

pub const EXEMPLAR_COUNT: usize = 10;
pub const PROVENANCE_SLOT: &str = "provenance";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("no template named `{0}`")]
    Missing(String),
    #[error("template `{template}` has no value for slot `{slot}`")]
    Unfilled { template: String, slot: String },
    #[error("template `{template}` has an unterminated slot")]
    Unterminated { template: String },
    #[error("response template `{0}` lacks the provenance slot")]
    NoProvenance(String),
    #[error("expected {EXEMPLAR_COUNT} exemplars, found {0}")]
    ExemplarCount(usize),
    #[error("exemplar {index} has an invalid query: {message}")]
    BadExemplar { index: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid exemplar file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Slot names in order of appearance.
pub fn slots(name: &str, template: &str) -> Result<Vec<String>, TemplateError> {
    let mut found = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated { template: name.into() })?;
        found.push(after[..end].trim().to_string());
        rest = &after[end + 2..];
    }
    Ok(found)
}

/// Substitutes every slot; a slot without a value is an error, never a blank.
pub fn fill(name: &str, template: &str, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| TemplateError::Unterminated { template: name.into() })?;
        let slot = after[..end].trim();
        let value = values
            .get(slot)
            .ok_or_else(|| TemplateError::Unfilled { template: name.into(), slot: slot.into() })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl TemplateSet {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> TemplateSet {
        TemplateSet {
            templates: pairs.into_iter().map(|(n, t)| (n.to_string(), t.trim_end().to_string())).collect(),
        }
    }

    /// Reads every `*.txt` file in `dir`; the file stem names the template.
    pub fn load_dir(dir: &Path) -> Result<TemplateSet, TemplateError> {
        let io = |source| TemplateError::Io { path: dir.display().to_string(), source };
        let mut templates = BTreeMap::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| TemplateError::Io { path: path.display().to_string(), source })?;
                templates.insert(name, text.trim_end().to_string());
            }
        }
        Ok(TemplateSet { templates })
    }

    pub fn get(&self, name: &str) -> Result<&str, TemplateError> {
        self.templates.get(name).map(String::as_str).ok_or_else(|| TemplateError::Missing(name.into()))
    }

    pub fn render(&self, name: &str, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        fill(name, self.get(name)?, values)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn checksums(&self) -> BTreeMap<String, String> {
        self.templates.iter().map(|(n, t)| (n.clone(), sha256_hex(t))).collect()
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    pub query: String,
}

pub fn parse_exemplars(json: &str) -> Result<Vec<Exemplar>, TemplateError> {
    let exemplars: Vec<Exemplar> = serde_json::from_str(json)?;
    if exemplars.len() != EXEMPLAR_COUNT {
        return Err(TemplateError::ExemplarCount(exemplars.len()));
    }
    for (index, e) in exemplars.iter().enumerate() {
        parse_query(&e.query).map_err(|err| TemplateError::BadExemplar { index, message: err.to_string() })?;
    }
    Ok(exemplars)
}

/// Everything the agents say that is not computed: prompts, response
/// templates and exemplars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assets {
    pub prompts: TemplateSet,
    pub responses: TemplateSet,
    pub exemplars: Vec<Exemplar>,
    exemplar_source: String,
}

const BUILTIN_PROMPTS: &[(&str, &str)] = &[
    ("answer", include_str!("../../assets/prompts/answer.txt")),
    ("draft", include_str!("../../assets/prompts/draft.txt")),
    ("refine", include_str!("../../assets/prompts/refine.txt")),
    ("repair", include_str!("../../assets/prompts/repair.txt")),
    ("select_tools", include_str!("../../assets/prompts/select_tools.txt")),
];

const BUILTIN_RESPONSES: &[(&str, &str)] = &[
    ("active_researchers", include_str!("../../assets/templates/active_researchers.txt")),
    ("bridging_keywords", include_str!("../../assets/templates/bridging_keywords.txt")),
    ("communities", include_str!("../../assets/templates/communities.txt")),
    ("coupling", include_str!("../../assets/templates/coupling.txt")),
    ("fit_topics", include_str!("../../assets/templates/fit_topics.txt")),
    ("keyword_pmi", include_str!("../../assets/templates/keyword_pmi.txt")),
    ("pagerank", include_str!("../../assets/templates/pagerank.txt")),
    ("predict_links", include_str!("../../assets/templates/predict_links.txt")),
    ("rag_answer", include_str!("../../assets/templates/rag_answer.txt")),
    ("recommend_similar", include_str!("../../assets/templates/recommend_similar.txt")),
    ("topic", include_str!("../../assets/templates/topic.txt")),
    ("topic_trend", include_str!("../../assets/templates/topic_trend.txt")),
];

const BUILTIN_EXEMPLARS: &str = include_str!("../../assets/exemplars.json");

impl Assets {
    pub fn builtin() -> Assets {
        Assets::assemble(
            TemplateSet::from_pairs(BUILTIN_PROMPTS.iter().copied()),
            TemplateSet::from_pairs(BUILTIN_RESPONSES.iter().copied()),
            BUILTIN_EXEMPLARS.to_string(),
        )
        .expect("bundled assets are valid")
    }

    /// Loads `prompts/`, `templates/` and `exemplars.json` from `dir`.
    pub fn load(dir: &Path) -> Result<Assets, TemplateError> {
        let path = dir.join("exemplars.json");
        let exemplars = std::fs::read_to_string(&path)
            .map_err(|source| TemplateError::Io { path: path.display().to_string(), source })?;
        Assets::assemble(
            TemplateSet::load_dir(&dir.join("prompts"))?,
            TemplateSet::load_dir(&dir.join("templates"))?,
            exemplars,
        )
    }

    fn assemble(prompts: TemplateSet, responses: TemplateSet, exemplar_source: String) -> Result<Assets, TemplateError> {
        for name in responses.names() {
            let found = slots(name, responses.get(name)?)?;
            if !found.iter().any(|s| s == PROVENANCE_SLOT) {
                return Err(TemplateError::NoProvenance(name.into()));
            }
        }
        for name in prompts.names() {
            slots(name, prompts.get(name)?)?;
        }
        let exemplars = parse_exemplars(&exemplar_source)?;
        Ok(Assets { prompts, responses, exemplars, exemplar_source })
    }

    /// sha256 of every asset, keyed `prompts/<name>`, `templates/<name>` and
    /// `exemplars`.
    pub fn checksums(&self) -> BTreeMap<String, String> {
        let mut sums = BTreeMap::new();
        for (name, sum) in self.prompts.checksums() {
            sums.insert(format!("prompts/{name}"), sum);
        }
        for (name, sum) in self.responses.checksums() {
            sums.insert(format!("templates/{name}"), sum);
        }
        sums.insert("exemplars".into(), sha256_hex(&self.exemplar_source));
        sums
    }
}
