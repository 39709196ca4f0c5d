mod common;

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use litnav_core::agent::Artifacts;
use litnav_core::corpus::CorpusStore;
use litnav_core::embed::StubEmbedder;
use litnav_core::mining::{representatives, topic_trend, MiningParams};
use litnav_core::querylang::{parse_query, search};
use litnav_service::{Landscape, ServiceConfig, TopicBundle};
use serde_json::{json, Value};

fn fixture_store() -> CorpusStore {
    CorpusStore::ingest(std::fs::read_to_string(common::fixture()).unwrap().lines())
}

/// Artifacts computed without the service, from the approved query.
fn direct_artifacts(query: &str) -> Artifacts {
    let store = fixture_store();
    let q = parse_query(query).unwrap();
    let hits = search(&q, &store);
    Artifacts::build(store.subset(hits.iter().map(String::as_str)).records().cloned().collect(), &StubEmbedder, &MiningParams::default())
        .unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn draft_then_approve_reaches_ready() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let id = server.create().await;
    let (_, view) = server.get(&format!("/api/sessions/{id}")).await;
    assert_eq!(view["state"], "Drafting");
    assert_eq!(view["in_flight"], false);

    let reply = server.say(&id, common::DRAFT).await;
    assert_eq!(reply["state"], "AwaitingConfirmation");
    assert_eq!(reply["in_flight"], false);
    assert!(common::texts(&reply)[0].contains(r#"TS=("large language model*" OR llm*)"#));

    let (_, reply) = server.ready_session().await;
    let papers = direct_artifacts(
        r#"TS=("large language model*" OR llm* OR "mental health") AND TS=(healthcare OR clinical OR "mental health")"#,
    )
    .store
    .len();
    assert!(common::texts(&reply)[0].starts_with(&format!("Retrieved {papers} papers.")));
}

#[tokio::test(flavor = "multi_thread")]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let (status, body) = server.get("/api/sessions/deadbeef").await;
    assert_eq!(status, 404);
    assert_eq!(body["error"]["code"], "not_found");
    let (status, _) = server.post("/api/sessions/deadbeef/messages", json!({ "text": "hi" })).await;
    assert_eq!(status, 404);

    let id = server.create().await;
    let (status, body) = server.post(&format!("/api/sessions/{id}/messages"), json!({ "text": "  " })).await;
    assert_eq!(status, 422);
    assert_eq!(body["error"]["code"], "empty_text");
    let (status, body) = server.get(&format!("/api/sessions/{id}/landscape")).await;
    assert_eq!(status, 409);
    assert_eq!(body["error"]["code"], "not_ready");
    assert!(body["error"]["message"].is_string());
    let (status, _) = server.get(&format!("/api/sessions/{id}/graph")).await;
    assert_eq!(status, 409);
    let (status, _) = server.post(&format!("/api/sessions/{id}/messages"), json!({ "wrong": 1 })).await;
    assert_eq!(status, 400);
    let (status, _) = server.get("/api/nothing").await;
    assert_eq!(status, 404);
}

#[tokio::test(flavor = "multi_thread")]
async fn session_ids_are_unique_hex() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let mut ids = HashSet::new();
    for _ in 0..1000 {
        let (id, _) = server.app.create_session(None).unwrap();
        assert_eq!(id.len(), 32);
        assert!(id.chars().all(|c| c.is_ascii_hexdigit()));
        assert!(ids.insert(id), "duplicate session id");
    }
    let via_http = server.create().await;
    assert!(ids.insert(via_http));
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_messages_get_200_or_409() {
    let dir = tempfile::tempdir().unwrap();
    let slow = Arc::new(common::Slow(common::scripted(), Duration::from_millis(150)));
    let server = Arc::new(common::start_with(common::config(dir.path()), slow).await);
    let id = server.create().await;
    let other = server.create().await;

    let mut tasks = Vec::new();
    for i in 0..12 {
        let (server, id) = (server.clone(), if i % 4 == 3 { other.clone() } else { id.clone() });
        tasks.push(tokio::spawn(async move {
            let (status, body) =
                server.post(&format!("/api/sessions/{id}/messages"), json!({ "text": common::DRAFT })).await;
            (id, status, body)
        }));
    }
    let mut by_session: BTreeMap<String, Vec<u16>> = BTreeMap::new();
    for t in tasks {
        let (sid, status, body) = t.await.unwrap();
        assert!(status == 200 || status == 409, "unexpected {status}: {body}");
        if status == 409 {
            assert_eq!(body["error"]["code"], "in_flight");
        }
        by_session.entry(sid).or_default().push(status);
    }
    for statuses in by_session.values() {
        assert!(statuses.contains(&200));
    }
    assert!(by_session[&id].contains(&409), "overlapping requests must conflict: {by_session:?}");
    let (_, view) = server.get(&format!("/api/sessions/{id}")).await;
    assert_eq!(view["in_flight"], false);
}

#[tokio::test(flavor = "multi_thread")]
async fn landscape_matches_model_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let (id, _) = server.ready_session().await;
    let (status, raw) = server.get(&format!("/api/sessions/{id}/landscape")).await;
    assert_eq!(status, 200);
    let parsed: Landscape = serde_json::from_value(raw.clone()).expect("payload fits the schema");
    assert_eq!(serde_json::to_value(&parsed).unwrap(), raw);

    let (_, view) = server.get(&format!("/api/sessions/{id}")).await;
    let confirmed = view["confirmed"].as_str().unwrap().to_string();
    let direct = direct_artifacts(&confirmed);
    assert_eq!(parsed.points.len(), direct.index.len());
    for t in &parsed.topics {
        let members = parsed.points.iter().filter(|p| p.topic == t.id).count();
        assert_eq!(members, t.size);
        assert_eq!(t.size, direct.model.sizes[t.id as usize]);
    }
    let outliers = parsed.points.iter().filter(|p| p.topic == -1).count();
    assert_eq!(outliers, direct.model.outlier_count);
    assert_eq!(parsed.topics.iter().map(|t| t.size).sum::<usize>() + outliers, parsed.points.len());
}

#[tokio::test(flavor = "multi_thread")]
async fn topic_bundle_equals_direct_calls() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let (id, _) = server.ready_session().await;
    let (_, view) = server.get(&format!("/api/sessions/{id}")).await;
    let direct = direct_artifacts(view["confirmed"].as_str().unwrap());

    for topic in 0..direct.model.k as i64 {
        let (status, raw) = server.get(&format!("/api/sessions/{id}/topics/{topic}")).await;
        assert_eq!(status, 200);
        let bundle: TopicBundle = serde_json::from_value(raw).unwrap();
        assert_eq!(bundle.size, direct.model.sizes[topic as usize]);
        let terms = bundle.terms.unwrap();
        let expected = &direct.model.terms[topic as usize];
        assert_eq!(terms.len(), expected.len());
        for (got, want) in terms.iter().zip(expected) {
            assert_eq!(got.term, want.item);
            assert!((got.score - want.score).abs() < 1e-12);
        }
        let reps = bundle.representatives.unwrap();
        let expected = representatives(&direct.model, &direct.index, topic, 5).unwrap();
        assert_eq!(reps.len(), expected.len());
        for (got, want) in reps.iter().zip(expected.iter()) {
            assert_eq!(got.uid, want.item);
            // JSON decoding may differ from the exact value in the last bit.
            assert!((got.score - want.score).abs() < 1e-12);
        }
        let trend: BTreeMap<i32, usize> = bundle.trend.into_iter().map(|y| (y.year, y.count)).collect();
        assert_eq!(trend, topic_trend(&direct.model, &direct.store, topic).unwrap());
    }

    let (status, raw) = server.get(&format!("/api/sessions/{id}/topics/-1")).await;
    assert_eq!(status, 200);
    assert!(raw.get("terms").is_none() && raw.get("representatives").is_none());
    assert!(raw["trend"].is_array());
    assert_eq!(raw["size"], direct.model.outlier_count);

    for bad in ["99", "x"] {
        let (status, body) = server.get(&format!("/api/sessions/{id}/topics/{bad}")).await;
        assert_eq!(status, 404, "{bad}");
        assert_eq!(body["error"]["code"], "not_found");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn graph_dump_covers_retrieved_papers() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let (id, _) = server.ready_session().await;
    let (status, dump) = server.get(&format!("/api/sessions/{id}/graph")).await;
    assert_eq!(status, 200);
    let (_, view) = server.get(&format!("/api/sessions/{id}")).await;
    let direct = direct_artifacts(view["confirmed"].as_str().unwrap());
    assert_eq!(dump, serde_json::to_value(direct.bkg.dump()).unwrap());
    let papers = dump["nodes"].as_array().unwrap().iter().filter(|n| n["kind"] == "paper").count();
    assert_eq!(papers, direct.store.len());
}

#[tokio::test(flavor = "multi_thread")]
async fn analysis_turns_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let (id, _) = server.ready_session().await;
    let reply = server.say(&id, "what topics exist?").await;
    assert_eq!(reply["state"], "Ready");
    let text = common::texts(&reply).join("\n");
    let (_, landscape) = server.get(&format!("/api/sessions/{id}/landscape")).await;
    for t in landscape["topics"].as_array().unwrap() {
        assert!(text.contains(&format!("- Topic {} ({} papers)", t["id"], t["size"])), "{text}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn corpus_upload() {
    let dir = tempfile::tempdir().unwrap();
    let server = common::start(dir.path()).await;
    let body = std::fs::read_to_string(common::fixture()).unwrap();
    let with_junk = format!("{body}not json\n{}\n", body.lines().next().unwrap());
    let (status, first) = server.post_raw("/api/corpora", with_junk.clone()).await;
    assert_eq!(status, 200, "{first}");
    let stats = &first["stats"];
    let plain = serde_json::to_value(CorpusStore::ingest(body.lines()).stats()).unwrap();
    assert_eq!(stats["accepted"], 50);
    assert_eq!(stats["accepted"], plain["accepted"]);
    assert_eq!(stats["rejected"], plain["rejected"].as_u64().unwrap() + 1);
    assert_eq!(stats["deduplicated"], plain["deduplicated"].as_u64().unwrap() + 1);

    let (_, second) = server.post_raw("/api/corpora", with_junk).await;
    assert_ne!(first["corpus_id"], second["corpus_id"]);
    assert_eq!(first["stats"], second["stats"]);

    let corpus_id = first["corpus_id"].as_str().unwrap();
    let (status, created) = server.post("/api/sessions", json!({ "corpus_id": corpus_id })).await;
    assert_eq!(status, 200);
    let (status, _) = server.post("/api/sessions", json!({ "corpus_id": "missing" })).await;
    assert_eq!(status, 404);
    let (_, view) = server.get(&format!("/api/sessions/{}", created["session_id"].as_str().unwrap())).await;
    assert_eq!(view["corpus_id"], corpus_id);
}

#[tokio::test(flavor = "multi_thread")]
async fn oversized_upload_is_413() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { max_upload_bytes: 1024, ..common::config(dir.path()) };
    let server = common::start_with(config, common::scripted()).await;
    let body = std::fs::read_to_string(common::fixture()).unwrap();
    let (status, err) = server.post_raw("/api/corpora", body).await;
    assert_eq!(status, 413);
    assert_eq!(err["error"]["code"], "too_large");
}

/// Replies of the analysis turns, as plain text.
async fn analysis_texts(server: &common::Server, id: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for turn in ["what topics exist?", "tell me about topic 1", "show the trend"] {
        out.push(common::texts(&server.say(id, turn).await));
    }
    out
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_resumes_sessions() {
    let straight_dir = tempfile::tempdir().unwrap();
    let straight = common::start(straight_dir.path()).await;
    let (sid, _) = straight.ready_session().await;
    let expected = analysis_texts(&straight, &sid).await;

    let dir = tempfile::tempdir().unwrap();
    let (id, drafting) = {
        let first = common::start(dir.path()).await;
        let (id, _) = first.ready_session().await;
        let drafting = first.create().await;
        first.say(&drafting, common::DRAFT).await;
        (id, drafting)
    };
    let second = common::start(dir.path()).await;
    let (status, view) = second.get(&format!("/api/sessions/{id}")).await;
    assert_eq!(status, 200);
    assert_eq!(view["state"], "Ready");
    let (status, _) = second.get(&format!("/api/sessions/{id}/landscape")).await;
    assert_eq!(status, 200);
    assert_eq!(analysis_texts(&second, &id).await, expected);

    let (_, view) = second.get(&format!("/api/sessions/{drafting}")).await;
    assert_eq!(view["state"], "AwaitingConfirmation");
    let reply = second.say(&drafting, common::REFINE).await;
    assert!(common::texts(&reply)[0].contains("\"mental health\""));

    let persisted: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("sessions").join(format!("{id}.json"))).unwrap()).unwrap();
    assert_eq!(persisted["session"]["state"], "Ready");
    let key = persisted["session"]["bkg_ref"].as_str().unwrap().trim_start_matches("bkg-").to_string();
    assert!(dir.path().join("artifacts").join(key).join("landscape.json").exists());
}
