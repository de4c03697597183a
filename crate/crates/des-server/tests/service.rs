//! End-to-end tests over a live listener: the full ingest pipeline, exact
//! byte reads, verification, enrichment, and crash-consistency across a
//! restart.

use des_server::{build_router, build_state, ServiceConfig};
use serde_json::{json, Value};
use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;

async fn spawn_app(store: &Path) -> (SocketAddr, tokio::task::JoinHandle<()>) {
    let cfg = ServiceConfig {
        store_path: Some(store.to_path_buf()),
        ..Default::default()
    };
    let state = build_state(&cfg).expect("state builds");
    let router = build_router(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = tokio::spawn(async move {
        axum::serve(listener, router).await.unwrap();
    });
    (addr, handle)
}

fn draft(id_nibble: u8) -> Value {
    json!({
        "schema_version": "0.3.0",
        "decision_context": {
            "decision_id": format!("{:08x}-2222-4333-8444-555566667777", id_nibble),
            "decision_type": "risk_scoring",
            "environment": {"system_id": "payments"}
        },
        "decision_logic": {"logic_type": "ml_inference", "output": {"score": 0.62}},
        "human_override_record": {"override_occurred": false},
        "temporal_metadata": {
            "event_timestamp": "2026-03-14T09:26:53.589Z",
            "evidence_tier": "lightweight"
        }
    })
}

#[tokio::test]
async fn ingest_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _server) = spawn_app(dir.path()).await;
    let client = reqwest::Client::new();
    let base = format!("http://{addr}");

    // Valid draft on a fresh stream gets sequence 1.
    let response = client
        .post(format!("{base}/v1/events"))
        .json(&draft(1))
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 201);
    let receipt: Value = response.json().await.unwrap();
    assert_eq!(receipt["sequence_number"], json!(1));
    assert_eq!(receipt["evidence_tier"], json!("lightweight"));
    let decision_id = receipt["decision_id"].as_str().unwrap().to_string();
    let current_hash = receipt["current_hash"].as_str().unwrap().to_string();

    // GET returns the exact stored bytes; re-hashing them reproduces the
    // receipt's hash.
    let body = client
        .get(format!("{base}/v1/events/{decision_id}"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    let event = des_core::parse_event(&body).unwrap();
    assert_eq!(des_core::serialize_event(&event), body.as_ref());
    assert_eq!(event.current_hash(), Some(current_hash.as_str()));
    let recomputed = des_core::crypto::compute_event_hash(&event).unwrap();
    assert_eq!(recomputed.hex.as_str(), current_hash);

    // Unknown id is a 404.
    let missing = client
        .get(format!("{base}/v1/events/00000000-0000-4000-8000-000000000000"))
        .send()
        .await
        .unwrap();
    assert_eq!(missing.status(), 404);

    // Verify endpoint is clean for the stream, 404 for unknown streams.
    let verify: Value = client
        .get(format!("{base}/v1/streams/payments/verify"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(verify["findings"], json!([]));
    let unknown = client
        .get(format!("{base}/v1/streams/ghost/verify"))
        .send()
        .await
        .unwrap();
    assert_eq!(unknown.status(), 404);

    // Replaying the same decision conflicts.
    let replay = client
        .post(format!("{base}/v1/events"))
        .json(&draft(1))
        .send()
        .await
        .unwrap();
    assert_eq!(replay.status(), 409);
}

#[tokio::test]
async fn invalid_drafts_get_422_with_rule_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _server) = spawn_app(dir.path()).await;
    let client = reqwest::Client::new();
    let base = format!("http://{addr}");

    // R4: override fields present while override_occurred is false.
    let mut bad = draft(2);
    bad["human_override_record"]["original_output"] = json!("x");
    let response = client.post(format!("{base}/v1/events")).json(&bad).send().await.unwrap();
    assert_eq!(response.status(), 422);
    let report: Value = response.json().await.unwrap();
    let rules: Vec<&str> = report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["rule_id"].as_str().unwrap())
        .collect();
    assert!(rules.contains(&"R4"), "{rules:?}");

    // Client-supplied sequence numbers are rejected.
    let mut stamped = draft(3);
    stamped["temporal_metadata"]["sequence_number"] = json!(9);
    let response = client.post(format!("{base}/v1/events")).json(&stamped).send().await.unwrap();
    assert_eq!(response.status(), 422);
    let report: Value = response.json().await.unwrap();
    assert_eq!(report["violations"][0]["rule_id"], json!("S1"));

    // Drafts without a stream identity are rejected.
    let mut streamless = draft(4);
    streamless["decision_context"].as_object_mut().unwrap().remove("environment");
    let response = client.post(format!("{base}/v1/events")).json(&streamless).send().await.unwrap();
    assert_eq!(response.status(), 422);
    let report: Value = response.json().await.unwrap();
    assert_eq!(report["violations"][0]["rule_id"], json!("S2"));

    // Malformed JSON is a 400.
    let response = client
        .post(format!("{base}/v1/events"))
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 400);

    // Explicit null is a 400 parse error, not a validation report.
    let response = client
        .post(format!("{base}/v1/events"))
        .body(r#"{"decision_boundary":null}"#)
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 400);
    let body: Value = response.json().await.unwrap();
    assert!(body["detail"].as_str().unwrap().contains("decision_boundary"));
}

#[tokio::test]
async fn enrichments_append_without_touching_the_event() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _server) = spawn_app(dir.path()).await;
    let client = reqwest::Client::new();
    let base = format!("http://{addr}");

    let receipt: Value = client
        .post(format!("{base}/v1/events"))
        .json(&draft(5))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let decision_id = receipt["decision_id"].as_str().unwrap().to_string();
    let before = client
        .get(format!("{base}/v1/events/{decision_id}"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();

    let response = client
        .post(format!("{base}/v1/enrichments"))
        .json(&json!({
            "decision_id": decision_id,
            "kind": "ground_truth",
            "payload": {"observed_outcome": "no_default", "arrived": "2026-04-01T00:00:00.000Z"}
        }))
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 201);
    let record: Value = response.json().await.unwrap();
    assert_eq!(record["decision_id"].as_str().unwrap(), decision_id);

    // Target bytes are byte-identical after enrichment.
    let after = client
        .get(format!("{base}/v1/events/{decision_id}"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(before, after);

    let list: Value = client
        .get(format!("{base}/v1/events/{decision_id}/enrichments"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(list.as_array().unwrap().len(), 1);

    // Unknown target is a 404.
    let response = client
        .post(format!("{base}/v1/enrichments"))
        .json(&json!({
            "decision_id": "00000000-0000-4000-8000-00000000dead",
            "kind": "ground_truth",
            "payload": {}
        }))
        .send()
        .await
        .unwrap();
    assert_eq!(response.status(), 404);
}

#[tokio::test]
async fn partial_append_is_truncated_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    {
        let (addr, server) = spawn_app(dir.path()).await;
        let client = reqwest::Client::new();
        let base = format!("http://{addr}");
        for i in 10..12u8 {
            let response = client.post(format!("{base}/v1/events")).json(&draft(i)).send().await.unwrap();
            assert_eq!(response.status(), 201);
        }
        server.abort();
    }

    // Simulate a crash mid-append: a torn trailing line in the segment.
    let segment = dir.path().join("payments").join("0.events.ndjson");
    let mut file = std::fs::OpenOptions::new().append(true).open(&segment).unwrap();
    file.write_all(br#"{"schema_version":"0.3.0","decision_context":{"decision_id":"aaaaaaaa-"#)
        .unwrap();
    file.sync_data().unwrap();
    drop(file);

    // On restart the torn line is gone, the chain verifies, and the next
    // append continues from sequence 3.
    let (addr, _server) = spawn_app(dir.path()).await;
    let client = reqwest::Client::new();
    let base = format!("http://{addr}");
    let verify: Value = client
        .get(format!("{base}/v1/streams/payments/verify"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(verify["findings"], json!([]), "torn line must not surface as corruption");
    assert_eq!(verify["events_checked"], json!(2));

    let receipt: Value = client
        .post(format!("{base}/v1/events"))
        .json(&draft(12))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(receipt["sequence_number"], json!(3));
}
