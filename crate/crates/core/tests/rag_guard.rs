mod common;

use std::collections::BTreeSet;

use litnav_core::agent::{
    compose_response, rag_answer, run_tool, Artifacts, Assets, RagAnswer, Script, ScriptedProvider, Task, ToolCall,
    ToolContext, RAG_K,
};
use litnav_core::embed::{EmbeddingProvider, StubEmbedder};
use litnav_core::mining::MiningParams;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const QUESTIONS: &[&str] = &[
    "how are language models evaluated in clinical settings",
    "which chatbots support mental health",
    "speech markers of dementia",
    "radiology image classification with deep learning",
    "privacy risks of patient data",
];

fn artifacts() -> Artifacts {
    let store = common::ai4health();
    Artifacts::build(store.records().cloned().collect(), &StubEmbedder, &MiningParams::default()).unwrap()
}

fn retrieved_for(a: &Artifacts, question: &str) -> Vec<String> {
    let q = StubEmbedder.embed_batch(&[question.to_string()]).unwrap().remove(0);
    a.index.knn(&q, RAG_K).unwrap().into_iter().map(|(u, _)| u).collect()
}

/// Every citation-shaped bracket left in `text`, split into its elements.
fn bracket_uids(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('[') {
        let Some(len) = rest[open + 1..].find(']') else { break };
        out.extend(rest[open + 1..open + 1 + len].split([',', ';']).map(|s| s.trim().to_string()));
        rest = &rest[open + 2 + len..];
    }
    out
}

struct Case {
    question: &'static str,
    response: String,
    bad: BTreeSet<String>,
}

fn adversarial_cases(a: &Artifacts) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let all: Vec<String> = a.store.uids().map(str::to_string).collect();
    (0..20)
        .map(|i| {
            let question = QUESTIONS[i % QUESTIONS.len()];
            let retrieved = retrieved_for(a, question);
            let outside: Vec<&String> = all.iter().filter(|u| !retrieved.contains(u)).collect();
            let good = retrieved.choose(&mut rng).unwrap().clone();
            let mut bad = BTreeSet::new();
            let mut pick_bad = |rng: &mut ChaCha8Rng| {
                let uid = if rng.gen_bool(0.5) {
                    (*outside.choose(rng).unwrap()).clone()
                } else {
                    format!("FAKE{:02}", rng.gen_range(0..100))
                };
                bad.insert(uid.clone());
                uid
            };
            let response = match i % 5 {
                0 => format!("Evidence is mixed [{}].", pick_bad(&mut rng)),
                1 => format!("See [{good}] and [{}].", pick_bad(&mut rng)),
                2 => format!("Several studies agree [{good}, {}].", pick_bad(&mut rng)),
                3 => {
                    let (x, y) = (pick_bad(&mut rng), pick_bad(&mut rng));
                    format!("Reported in [{x}; {good}] and again in [{y}].")
                }
                _ => {
                    let x = pick_bad(&mut rng);
                    format!("Claimed by [{x}] [{x}] and supported by [{good}].")
                }
            };
            Case { question, response, bad }
        })
        .collect()
}

#[test]
fn twenty_adversarial_scripts_are_all_caught() {
    let a = artifacts();
    let assets = Assets::builtin();
    let cases = adversarial_cases(&a);
    assert_eq!(cases.len(), 20);
    let mut caught = 0;
    for case in &cases {
        let provider = ScriptedProvider::new(Script::default().rule(Task::Answer, None, case.response.clone()));
        let answer = rag_answer(&provider, &assets, &StubEmbedder, &a.index, &a.store, case.question, RAG_K).unwrap();
        let allowed: BTreeSet<&str> = answer.retrieved.iter().map(String::as_str).collect();
        let stripped: BTreeSet<String> = answer.stripped.iter().cloned().collect();
        let leftover = bracket_uids(&answer.answer);
        let flagged = stripped == case.bad;
        let clean = leftover.iter().all(|u| allowed.contains(u.as_str()));
        let good_kept = case.response.starts_with("Evidence") || !answer.cited.is_empty();
        if flagged && clean && good_kept {
            caught += 1;
        }
    }
    assert_eq!(caught, 20, "guard must catch every adversarial script");
}

#[test]
fn stripped_citations_are_flagged_in_the_reply() {
    let a = artifacts();
    let assets = Assets::builtin();
    let provider = ScriptedProvider::new(Script::default().rule(Task::Answer, None, "Shown in [NOPE1]."));
    let ctx = ToolContext { artifacts: &a, provider: &provider, embedder: &StubEmbedder, assets: &assets };
    let result = run_tool(&ToolCall::new("rag_answer", json!({ "question": "speech markers of dementia" })), &ctx).unwrap();
    let answer: RagAnswer = serde_json::from_value(result.result.clone()).unwrap();
    assert_eq!(answer.stripped, vec!["NOPE1".to_string()]);
    assert_eq!(answer.answer, "Shown in.");
    let text = compose_response(&assets.responses, &[result]).unwrap();
    assert!(text.contains("NOPE1"), "flag names the removed uid: {text}");
    assert!(text.contains("Removed 1 citation"));
}

#[test]
fn retrieved_citations_survive_untouched() {
    let a = artifacts();
    let question = QUESTIONS[0];
    let retrieved = retrieved_for(&a, question);
    let response = format!("Both [{}] and [{}, {}] apply.", retrieved[0], retrieved[1], retrieved[2]);
    let provider = ScriptedProvider::new(Script::default().rule(Task::Answer, None, response.clone()));
    let answer =
        rag_answer(&provider, &Assets::builtin(), &StubEmbedder, &a.index, &a.store, question, RAG_K).unwrap();
    assert_eq!(answer.answer, response);
    assert!(answer.stripped.is_empty());
    assert_eq!(answer.cited, retrieved[..3].to_vec());
}
