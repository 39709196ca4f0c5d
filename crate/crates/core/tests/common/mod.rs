//! Fixtures, generators and independent oracles shared by the integration
//! tests. The oracles deliberately avoid the library's own helpers so that a
//! bug cannot hide in both places at once.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use litnav_core::agent::{Agent, Assets, Script, ScriptedProvider, Session, StepClock, Task};
use litnav_core::client::LocalCorpusClient;
use litnav_core::corpus::{normalize_name, CorpusStore, MetadataRecord};
use litnav_core::embed::StubEmbedder;
use litnav_core::mining::MiningParams;
use litnav_core::querylang::{FieldTag, Query};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const SYNTHETIC_SEED: u64 = 20_240_601;
pub const SYNTHETIC_SIZE: usize = 200;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn ai4health_lines() -> Vec<String> {
    std::fs::read_to_string(fixture_path("ai4health.jsonl"))
        .expect("fixture present")
        .lines()
        .map(str::to_string)
        .collect()
}

pub fn ai4health() -> CorpusStore {
    CorpusStore::ingest(ai4health_lines())
}

pub const VOCAB: &[&str] = &[
    "graph", "network", "citation", "topic", "model", "health", "clinical", "speech", "dementia", "language",
    "learning", "deep", "patient", "trial", "survey", "mining", "embedding", "cluster", "author", "query",
    "retrieval", "ranking", "bias", "privacy", "federated", "image", "radiology", "triage", "chatbot", "mental",
];

const GIVEN: &[&str] = &["Ada", "Ben", "Chen", "Dana", "Eli", "Fatima", "Goran", "Hana", "Ivan", "Jun"];
const FAMILY: &[&str] = &[
    "Smith", "Garcia", "Okafor", "Tanaka", "Muller", "Rossi", "Kowalski", "Haddad", "Larsen", "Silva", "Novak",
    "Ito",
];
const VENUES: &[&str] = &["Journal A", "journal  a", "Proc. B", "Letters C", "Review D", ""];
const INSTITUTIONS: &[&str] = &["Univ One", "univ one", "Institute Two", "Lab Three"];

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Deterministic synthetic corpus lines. Uids are unique; references point
/// at earlier papers, outside papers and occasionally repeat.
pub fn synthetic_lines(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(n);
    for i in 0..n {
        let uid = format!("S{i:03}");
        let authors: Vec<Value> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let name = if rng.gen_bool(0.5) {
                    format!("{} {}", GIVEN.choose(&mut rng).unwrap(), FAMILY.choose(&mut rng).unwrap())
                } else {
                    format!("{}, {}", FAMILY.choose(&mut rng).unwrap(), GIVEN.choose(&mut rng).unwrap())
                };
                if rng.gen_bool(0.6) {
                    json!({ "name": name, "institution": INSTITUTIONS.choose(&mut rng).unwrap() })
                } else {
                    json!({ "name": name })
                }
            })
            .collect();
        let keywords: Vec<String> = (0..rng.gen_range(0..=3)).map(|_| words(&mut rng, 1, 2)).collect();
        let mut references: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(0..=4) {
            if i > 0 && rng.gen_bool(0.8) {
                references.push(format!("S{:03}", rng.gen_range(0..i)));
            } else {
                references.push(format!("X{}", rng.gen_range(0..50)));
            }
        }
        if !references.is_empty() && rng.gen_bool(0.1) {
            references.push(references[0].clone());
        }
        let record = json!({
            "uid": uid,
            "title": words(&mut rng, 3, 6),
            "abstract": words(&mut rng, 8, 16),
            "authors": authors,
            "venue": VENUES.choose(&mut rng).unwrap(),
            "year": rng.gen_range(2000..=2024),
            "keywords": keywords,
            "references": references,
        });
        lines.push(record.to_string());
    }
    lines
}

pub fn synthetic() -> CorpusStore {
    CorpusStore::ingest(synthetic_lines(SYNTHETIC_SEED, SYNTHETIC_SIZE))
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Node and edge counts by kind computed straight from raw JSON.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub nodes: BTreeMap<&'static str, usize>,
    pub edges: BTreeMap<&'static str, usize>,
}

fn oracle_name(raw: &str) -> String {
    let raw = raw.trim();
    let (family, given) = match raw.split_once(',') {
        Some((f, g)) => (f.to_string(), g.to_string()),
        None => {
            let parts: Vec<&str> = raw.split_whitespace().collect();
            (parts[parts.len() - 1].to_string(), parts[..parts.len() - 1].join(" "))
        }
    };
    let initials: Vec<String> = given
        .split(|c: char| c.is_whitespace() || c == '.')
        .filter_map(|p| p.chars().next())
        .map(|c| format!("{}.", c.to_lowercase()))
        .collect();
    if initials.is_empty() {
        squash(&family)
    } else {
        format!("{}, {}", squash(&family), initials.join(" "))
    }
}

pub fn tally(lines: &[String]) -> Tally {
    let mut seen = BTreeSet::new();
    let records: Vec<Value> = lines
        .iter()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter(|v| v["uid"].as_str().is_some_and(|u| seen.insert(u.to_string())))
        .collect();
    let uids: BTreeSet<&str> = records.iter().map(|r| r["uid"].as_str().unwrap()).collect();
    let mut authors = BTreeSet::new();
    let mut venues = BTreeSet::new();
    let mut keywords = BTreeSet::new();
    let mut institutions = BTreeSet::new();
    let mut cites = BTreeSet::new();
    let mut authored = BTreeSet::new();
    let mut published = 0;
    let mut has_keyword = BTreeSet::new();
    let mut affiliated = BTreeSet::new();
    let empty = Vec::new();
    for r in &records {
        let uid = r["uid"].as_str().unwrap();
        for a in r["authors"].as_array().unwrap_or(&empty) {
            let name = oracle_name(a["name"].as_str().unwrap());
            authors.insert(name.clone());
            authored.insert((name.clone(), uid));
            if let Some(inst) = a["institution"].as_str().map(squash).filter(|i| !i.is_empty()) {
                institutions.insert(inst.clone());
                affiliated.insert((name, inst));
            }
        }
        let venue = squash(r["venue"].as_str().unwrap_or(""));
        if !venue.is_empty() {
            venues.insert(venue);
            published += 1;
        }
        for k in r["keywords"].as_array().unwrap_or(&empty) {
            let k = squash(k.as_str().unwrap());
            if !k.is_empty() {
                keywords.insert(k.clone());
                has_keyword.insert((uid, k));
            }
        }
        for c in r["references"].as_array().unwrap_or(&empty) {
            let c = c.as_str().unwrap();
            if c != uid && uids.contains(c) {
                cites.insert((uid, c));
            }
        }
    }
    Tally {
        nodes: BTreeMap::from([
            ("paper", uids.len()),
            ("author", authors.len()),
            ("venue", venues.len()),
            ("keyword", keywords.len()),
            ("institution", institutions.len()),
        ]),
        edges: BTreeMap::from([
            ("cites", cites.len()),
            ("authored", authored.len()),
            ("published_in", published),
            ("has_keyword", has_keyword.len()),
            ("affiliated_with", affiliated.len()),
        ]),
    }
}

/// Brute-force evaluator over padded token strings: each searchable unit is
/// ` tok tok ... ` and a phrase matches when its padded form is a substring.
pub struct BruteRecord {
    ts: Vec<String>,
    ti: Vec<String>,
    ab: Vec<String>,
    au: Vec<String>,
    au_canonical: Vec<String>,
    year: i32,
}

fn padded(text: &str) -> String {
    let mut out = String::from(" ");
    let lowered = text.to_lowercase();
    for piece in lowered.split(|c: char| !c.is_alphanumeric()).filter(|p| !p.is_empty()) {
        out.push_str(piece);
        out.push(' ');
    }
    out
}

impl BruteRecord {
    pub fn new(r: &MetadataRecord) -> BruteRecord {
        let mut ts = vec![padded(&r.title), padded(&r.abstract_text)];
        ts.extend(r.keywords.iter().map(|k| padded(k)));
        BruteRecord {
            ts,
            ti: vec![padded(&r.title)],
            ab: vec![padded(&r.abstract_text)],
            au: r.authors.iter().map(|a| padded(&a.canonical_name)).collect(),
            au_canonical: r.authors.iter().map(|a| a.canonical_name.clone()).collect(),
            year: r.year,
        }
    }

    fn units(&self, tag: FieldTag) -> &[String] {
        match tag {
            FieldTag::Ts => &self.ts,
            FieldTag::Ti => &self.ti,
            FieldTag::Ab => &self.ab,
            FieldTag::Au => &self.au,
            FieldTag::Py => &[],
        }
    }

    pub fn eval(&self, q: &Query, tag: FieldTag) -> bool {
        match q {
            Query::And(cs) => cs.iter().all(|c| self.eval(c, tag)),
            Query::Or(cs) => cs.iter().any(|c| self.eval(c, tag)),
            Query::Not(c) => !self.eval(c, tag),
            Query::Field(t, c) => self.eval(c, *t),
            Query::YearRange { lo, hi } => tag == FieldTag::Py && *lo <= self.year && self.year <= *hi,
            Query::Word { text, wildcard } => {
                let needle = if *wildcard { format!(" {}", text.to_lowercase()) } else { format!(" {} ", text.to_lowercase()) };
                self.units(tag).iter().any(|u| u.contains(&needle))
            }
            Query::Phrase(text) => {
                let p = padded(text);
                if p.trim().is_empty() {
                    return false;
                }
                if tag == FieldTag::Au && normalize_name(text).is_ok_and(|n| self.au_canonical.contains(&n)) {
                    return true;
                }
                let needle = if text.trim_end().ends_with('*') { p.trim_end().to_string() } else { p };
                self.units(tag).iter().any(|u| u.contains(&needle))
            }
        }
    }
}

pub fn brute_matches(q: &Query, r: &MetadataRecord) -> bool {
    BruteRecord::new(r).eval(q, FieldTag::Ts)
}

const TEXT_TAGS: [FieldTag; 4] = [FieldTag::Ts, FieldTag::Ti, FieldTag::Ab, FieldTag::Au];

fn gen_term(rng: &mut ChaCha8Rng) -> Query {
    let word = *VOCAB.choose(rng).unwrap();
    match rng.gen_range(0..6) {
        0 => Query::prefix(&word[..rng.gen_range(2..=word.len())]),
        1 => {
            let extra = *VOCAB.choose(rng).unwrap();
            let star = if rng.gen_bool(0.3) { "*" } else { "" };
            Query::phrase(&format!("{word} {extra}{star}"))
        }
        _ => Query::word(word),
    }
}

fn gen_years(rng: &mut ChaCha8Rng) -> Query {
    let lo = rng.gen_range(1995..=2024);
    Query::YearRange { lo, hi: rng.gen_range(lo..=2026) }
}

fn gen_inner(rng: &mut ChaCha8Rng, depth: u32, leaf: &dyn Fn(&mut ChaCha8Rng) -> Query) -> Query {
    if depth == 0 || rng.gen_bool(0.35) {
        return leaf(rng);
    }
    match rng.gen_range(0..3) {
        0 => Query::not(gen_inner(rng, depth - 1, leaf)),
        1 => Query::And((0..rng.gen_range(2..=3)).map(|_| gen_inner(rng, depth - 1, leaf)).collect()),
        _ => Query::Or((0..rng.gen_range(2..=3)).map(|_| gen_inner(rng, depth - 1, leaf)).collect()),
    }
}

/// Random valid query: boolean structure over fielded or field-free
/// subtrees, with PY fields holding year ranges only.
pub fn gen_query(rng: &mut ChaCha8Rng, depth: u32) -> Query {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..5) {
            0 => Query::field(FieldTag::Py, gen_inner(rng, 1, &gen_years)),
            1 => gen_inner(rng, 2, &gen_term),
            _ => Query::field(*TEXT_TAGS.choose(rng).unwrap(), gen_inner(rng, 2, &gen_term)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Query::not(gen_query(rng, depth - 1)),
        1 => Query::And((0..rng.gen_range(2..=3)).map(|_| gen_query(rng, depth - 1)).collect()),
        _ => Query::Or((0..rng.gen_range(2..=3)).map(|_| gen_query(rng, depth - 1)).collect()),
    }
}

/// Dense power iteration on an explicit transition matrix.
pub fn dense_pagerank(n: usize, edges: &[(usize, usize)], d: f64, iterations: usize) -> Vec<f64> {
    let mut out_deg = vec![0usize; n];
    let mut m = vec![vec![0.0; n]; n];
    let unique: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    for &(s, _) in &unique {
        out_deg[s] += 1;
    }
    for &(s, t) in &unique {
        m[t][s] = 1.0 / out_deg[s] as f64;
    }
    for (s, deg) in out_deg.iter().enumerate() {
        if *deg == 0 {
            for row in m.iter_mut() {
                row[s] = 1.0 / n as f64;
            }
        }
    }
    let mut r = vec![1.0 / n as f64; n];
    for _ in 0..iterations {
        r = (0..n).map(|i| (1.0 - d) / n as f64 + d * (0..n).map(|j| m[i][j] * r[j]).sum::<f64>()).collect();
    }
    let total: f64 = r.iter().sum();
    r.iter().map(|x| x / total).collect()
}

/// The scripted conversation used by the determinism and golden tests.
pub fn session_script() -> Script {
    let q = |s: &str| json!({ "query": s }).to_string();
    Script::default()
        .rule(
            Task::Draft,
            Some("healthcare tasks"),
            q(r#"TS=("large language model*" OR llm*) AND TS=(healthcare OR clinical)"#),
        )
        .rule(
            Task::Refine,
            Some("also include mental health"),
            q(r#"TS=("large language model*" OR llm* OR "mental health") AND TS=(healthcare OR clinical OR "mental health")"#),
        )
        .rule(Task::SelectTools, Some("what topics"), r#"[{"tool":"fit_topics","params":{}}]"#)
        .rule(Task::SelectTools, Some("trend of topic 0"), r#"[{"tool":"topic_trend","params":{"topic_id":0}}]"#)
        .rule(Task::SelectTools, Some("tell me about topic 1"), r#"[{"tool":"topic","params":{"topic_id":1}}]"#)
}

pub const SESSION_TURNS: &[&str] = &[
    "I want to know what healthcare tasks researchers have explored using LLMs for",
    "also include mental health",
    "approve",
    "what topics exist?",
    "tell me about topic 1",
    "show the trend of topic 0",
];

pub fn fixture_agent(script: Script) -> (Agent, Arc<ScriptedProvider>) {
    let provider = Arc::new(ScriptedProvider::new(script));
    let agent = Agent::new(
        provider.clone(),
        Arc::new(StubEmbedder),
        Arc::new(LocalCorpusClient::new(Arc::new(ai4health()))),
        Arc::new(Assets::builtin()),
        MiningParams::default(),
        Arc::new(StepClock::new(1_700_000_000_000, 1_000)),
    );
    (agent, provider)
}

/// Plays [`SESSION_TURNS`] through a fresh agent and session.
pub fn run_fixture_session() -> Session {
    let (agent, _) = fixture_agent(session_script());
    let mut session = agent.new_session("fixture".into());
    for turn in SESSION_TURNS {
        agent.advance(&mut session, turn).expect("non-empty turn");
    }
    session
}
