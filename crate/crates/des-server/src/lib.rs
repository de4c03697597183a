//! HTTP facade over the ledger write path.
//!
//! Endpoints:
//! - `POST /v1/events` - validate, tier, seal, append; 201 with the receipt,
//!   400 on parse errors, 422 with the validation report, 409 on replays.
//! - `GET /v1/events/{decision_id}` - exact stored bytes.
//! - `GET /v1/events/{decision_id}/enrichments` - linked records.
//! - `POST /v1/enrichments` - append-only enrichment of a sealed event.
//! - `GET /v1/streams/{system_id}/verify` - chain verification report.
//!
//! Sequence numbers are assigned server-side; drafts carrying
//! `sequence_number` or `current_hash` are rejected (rule id `S1`). Drafts
//! must name their stream via `decision_context.environment.system_id`
//! (rule id `S2`). Appends to one stream are serialized; distinct streams
//! proceed concurrently. No event is appended unless validation passed, and
//! no 201 is returned without a durable append.

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use des_core::chain::ChainError;
use des_core::enrichment::{self, EnrichmentError};
use des_core::event::{self, EventTime, ParseError};
use des_core::ledger::{Ledger, LedgerConfig, SubmitError};
use des_core::store::{StoreConfig, StoreError};
use des_core::validator::{ValidationReport, Violation};
use des_core::{crypto, DecisionEvent, EventSigner, TierPolicy};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize, Default)]
pub struct ServiceConfig {
    /// Listen address, e.g. "127.0.0.1:8321".
    pub listen: Option<String>,
    pub store_path: Option<PathBuf>,
    pub tier_policy_path: Option<PathBuf>,
    pub signing_key_path: Option<PathBuf>,
    pub signer_id: Option<String>,
    /// Keyed hashing for inputs flagged `"des:sensitive": true`.
    pub deployment_key: Option<String>,
    pub checkpoint_interval: Option<u64>,
}

impl ServiceConfig {
    pub fn load(path: Option<&std::path::Path>) -> std::io::Result<Self> {
        let mut cfg: ServiceConfig = match path {
            Some(p) => serde_json::from_slice(&std::fs::read(p)?)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
            None => ServiceConfig::default(),
        };
        cfg.apply_env();
        Ok(cfg)
    }

    /// `DES_*` variables override file values.
    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var("DES_LISTEN") {
            self.listen = Some(v);
        }
        if let Ok(v) = std::env::var("DES_STORE") {
            self.store_path = Some(PathBuf::from(v));
        }
        if let Ok(v) = std::env::var("DES_TIER_POLICY") {
            self.tier_policy_path = Some(PathBuf::from(v));
        }
        if let Ok(v) = std::env::var("DES_SIGNING_KEY") {
            self.signing_key_path = Some(PathBuf::from(v));
        }
        if let Ok(v) = std::env::var("DES_SIGNER_ID") {
            self.signer_id = Some(v);
        }
        if let Ok(v) = std::env::var("DES_DEPLOYMENT_KEY") {
            self.deployment_key = Some(v);
        }
    }

    pub fn listen_addr(&self) -> String {
        self.listen.clone().unwrap_or_else(|| "127.0.0.1:8321".to_string())
    }
}

pub struct AppState {
    pub ledger: Ledger,
    pub deployment_key: Option<String>,
}

pub fn build_state(cfg: &ServiceConfig) -> std::io::Result<Arc<AppState>> {
    let store_path = cfg
        .store_path
        .clone()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "store_path is required"))?;
    let tier_policy = match cfg.tier_policy_path.as_deref() {
        Some(p) => Some(
            TierPolicy::load(p).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?,
        ),
        None => None,
    };
    let signer = match cfg.signing_key_path.as_deref() {
        Some(p) => {
            let seed = std::fs::read_to_string(p)?;
            let signer_id = cfg.signer_id.clone().unwrap_or_else(|| "des-server".to_string());
            Some(
                EventSigner::from_seed_hex(seed.trim(), signer_id, None)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?,
            )
        }
        None => None,
    };
    let ledger = Ledger::open(
        &store_path,
        LedgerConfig {
            checkpoint_interval: cfg.checkpoint_interval.unwrap_or(1024),
            tier_policy,
            signer,
            store: StoreConfig::default(),
        },
    )
    .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))?;
    Ok(Arc::new(AppState {
        ledger,
        deployment_key: cfg.deployment_key.clone(),
    }))
}

pub fn build_router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/events", post(handle_ingest))
        .route("/v1/events/:decision_id", get(handle_get_event))
        .route("/v1/events/:decision_id/enrichments", get(handle_get_enrichments))
        .route("/v1/enrichments", post(handle_post_enrichment))
        .route("/v1/streams/:system_id/verify", get(handle_verify))
        .with_state(state)
}

pub async fn serve(cfg: ServiceConfig) -> std::io::Result<()> {
    let state = build_state(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.listen_addr()).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, build_router(state)).await
}

fn error_body(kind: &str, detail: impl ToString) -> Json<Value> {
    Json(json!({"error": kind, "detail": detail.to_string()}))
}

fn report_response(report: &ValidationReport) -> Response {
    (StatusCode::UNPROCESSABLE_ENTITY, Json(serde_json::to_value(report).expect("report serializes")))
        .into_response()
}

fn service_rule_response(rule_id: &str, path: &str, message: &str) -> Response {
    let report = ValidationReport {
        valid: false,
        violations: vec![Violation {
            rule_id: rule_id.to_string(),
            path: path.to_string(),
            message: message.to_string(),
        }],
        warnings: vec![],
        rules_evaluated: 0,
    };
    report_response(&report)
}

/// Keyed hashing for inputs explicitly flagged sensitive via the
/// `des:sensitive` extension key.
fn hash_flagged_inputs(draft: &mut DecisionEvent, key: &str) {
    let Some(inputs) = draft
        .decision_context
        .as_mut()
        .and_then(|c| c.inputs.as_mut())
    else {
        return;
    };
    for input in inputs.iter_mut() {
        let flagged = input.extensions.get("des:sensitive") == Some(&Value::Bool(true));
        if flagged {
            if let Some(value) = input.input_value.take() {
                input.input_value = match crypto::hash_sensitive_value(&value, key) {
                    Ok(digest) => Some(Value::String(digest)),
                    Err(_) => Some(value),
                };
            }
            input.extensions.remove("des:sensitive");
        }
    }
}

async fn handle_ingest(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let mut draft = match event::parse_event(&body) {
        Ok(d) => d,
        Err(e @ ParseError::Syntax { .. }) => {
            return (StatusCode::BAD_REQUEST, error_body("parse", e)).into_response()
        }
        Err(e @ ParseError::NullForbidden { .. }) | Err(e @ ParseError::Format { .. }) => {
            return (StatusCode::BAD_REQUEST, error_body("parse", e)).into_response()
        }
    };

    if draft.sequence_number().is_some() || draft.current_hash().is_some() || draft.previous_hash().is_some() {
        return service_rule_response(
            "S1",
            "temporal_metadata.sequence_number",
            "sequence_number and hash_chain are assigned by the service; drafts must not carry them",
        );
    }
    let Some(stream) = draft.system_id().map(str::to_string) else {
        return service_rule_response(
            "S2",
            "decision_context.environment.system_id",
            "drafts must name their stream in decision_context.environment.system_id",
        );
    };

    if let Some(key) = state.deployment_key.as_deref() {
        hash_flagged_inputs(&mut draft, key);
    }

    let result = tokio::task::spawn_blocking({
        let state = state.clone();
        move || state.ledger.submit(draft, Some(&stream))
    })
    .await
    .expect("submit task does not panic");

    match result {
        Ok(receipt) => (
            StatusCode::CREATED,
            Json(json!({
                "decision_id": receipt.decision_id,
                "sequence_number": receipt.sequence_number,
                "current_hash": receipt.current_hash,
                "evidence_tier": receipt.evidence_tier,
            })),
        )
            .into_response(),
        Err(SubmitError::Chain(ChainError::RejectedInvalid { report })) => report_response(&report),
        Err(SubmitError::Chain(ChainError::DraftAlreadyStamped(field))) => {
            service_rule_response("S1", "temporal_metadata", &format!("{field} is assigned by the service"))
        }
        Err(SubmitError::DuplicateDecision(id)) => (
            StatusCode::CONFLICT,
            error_body("duplicate_decision", format!("decision {id} is already sealed")),
        )
            .into_response(),
        Err(SubmitError::Store(StoreError::DuplicateSequence { stream, sequence })) => (
            StatusCode::CONFLICT,
            error_body("duplicate_sequence", format!("stream {stream} sequence {sequence}")),
        )
            .into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", e)).into_response(),
    }
}

async fn handle_get_event(State(state): State<Arc<AppState>>, Path(decision_id): Path<String>) -> Response {
    let result = tokio::task::spawn_blocking({
        let state = state.clone();
        move || state.ledger.store().lookup_raw(&decision_id)
    })
    .await
    .expect("lookup task does not panic");
    match result {
        Ok(Some(bytes)) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            bytes,
        )
            .into_response(),
        Ok(None) => (StatusCode::NOT_FOUND, error_body("not_found", "unknown decision_id")).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", e)).into_response(),
    }
}

async fn handle_get_enrichments(
    State(state): State<Arc<AppState>>,
    Path(decision_id): Path<String>,
) -> Response {
    let result = tokio::task::spawn_blocking({
        let state = state.clone();
        let decision_id = decision_id.clone();
        move || -> Result<Option<Vec<enrichment::EnrichmentRecord>>, StoreError> {
            if state.ledger.store().location(&decision_id).is_none() {
                return Ok(None);
            }
            state.ledger.store().enrichments_for(&decision_id).map(Some)
        }
    })
    .await
    .expect("enrichment task does not panic");
    match result {
        Ok(Some(records)) => (StatusCode::OK, Json(serde_json::to_value(records).expect("serializes"))).into_response(),
        Ok(None) => (StatusCode::NOT_FOUND, error_body("not_found", "unknown decision_id")).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", e)).into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct EnrichmentRequest {
    decision_id: String,
    kind: String,
    payload: Map<String, Value>,
    created_at: Option<String>,
}

async fn handle_post_enrichment(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: EnrichmentRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return (StatusCode::BAD_REQUEST, error_body("parse", e)).into_response(),
    };
    let created_at = match request.created_at.as_deref() {
        None => EventTime::now(),
        Some(ts) => match EventTime::parse(ts) {
            Ok(t) => t,
            Err(e) => return (StatusCode::BAD_REQUEST, error_body("parse", e)).into_response(),
        },
    };

    let result = tokio::task::spawn_blocking({
        let state = state.clone();
        move || -> Result<Option<enrichment::EnrichmentRecord>, Response> {
            let Some(target) = state
                .ledger
                .store()
                .lookup(&request.decision_id)
                .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", e)).into_response())?
            else {
                return Ok(None);
            };
            let record = enrichment::create_enrichment(&target, &request.kind, request.payload, created_at)
                .map_err(|e| match e {
                    EnrichmentError::KindInvalid(_) | EnrichmentError::NullInPayload(_) => {
                        (StatusCode::UNPROCESSABLE_ENTITY, error_body("enrichment", e)).into_response()
                    }
                    other => (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", other)).into_response(),
                })?;
            state
                .ledger
                .store()
                .append_enrichment(&record)
                .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", e)).into_response())?;
            Ok(Some(record))
        }
    })
    .await
    .expect("enrichment task does not panic");

    match result {
        Ok(Some(record)) => (StatusCode::CREATED, Json(serde_json::to_value(record).expect("serializes"))).into_response(),
        Ok(None) => (StatusCode::NOT_FOUND, error_body("not_found", "unknown decision_id")).into_response(),
        Err(response) => response,
    }
}

async fn handle_verify(State(state): State<Arc<AppState>>, Path(system_id): Path<String>) -> Response {
    let result = tokio::task::spawn_blocking({
        let state = state.clone();
        move || {
            let chain = state.ledger.store().verify_stream(&system_id)?;
            let checkpoints = state.ledger.store().verify_checkpoints(&system_id)?;
            Ok::<_, StoreError>((chain, checkpoints))
        }
    })
    .await
    .expect("verify task does not panic");
    match result {
        Ok((chain, checkpoints)) => {
            let mut body = serde_json::to_value(&chain).expect("report serializes");
            body["checkpoint_findings"] = json!(checkpoints);
            (StatusCode::OK, Json(body)).into_response()
        }
        Err(StoreError::UnknownStream(s)) => {
            (StatusCode::NOT_FOUND, error_body("not_found", format!("unknown stream {s}"))).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, error_body("internal", e)).into_response(),
    }
}
