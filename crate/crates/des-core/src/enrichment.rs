//! Append-only post-hoc enrichment of sealed events.
//!
//! Evidence that arrives after sealing (ground truth, late quality updates)
//! is captured as linked records keyed by `decision_id`. The sealed event's
//! bytes are never touched; `link_hash` binds an enrichment to the exact
//! sealed form it was created against, so a re-sealed or tampered target is
//! detectable as a stale link.

use crate::canonical;
use crate::crypto::{self, sha256_hex, CryptoError, EventSigner};
use crate::event::{self, DecisionEvent, DigitalSignature, EventTime, Hex64, ParseError, UuidString};
use crate::tokens;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const KIND_GROUND_TRUTH: &str = "ground_truth";
pub const KIND_QUALITY_UPDATE: &str = "quality_update";

#[derive(Debug, Error)]
pub enum EnrichmentError {
    #[error("target event is not sealed")]
    TargetUnsealed,
    #[error("target event has no decision_id")]
    TargetMissingId,
    #[error("enrichment kind {0:?} is neither a built-in nor a namespaced token")]
    KindInvalid(String),
    #[error("payload holds an explicit null at {0}")]
    NullInPayload(String),
    #[error("enrichment {enrichment_id} references decision {expected}, target is {found}")]
    DecisionMismatch {
        enrichment_id: String,
        expected: String,
        found: String,
    },
    #[error("enrichment {enrichment_id} is bound to a different sealed form of {decision_id}")]
    StaleEnrichment {
        enrichment_id: String,
        decision_id: String,
    },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// A post-hoc addition linked to one sealed event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub enrichment_id: UuidString,
    pub decision_id: UuidString,
    pub kind: String,
    pub payload: Map<String, Value>,
    pub created_at: EventTime,
    /// sha256 over the target's current_hash (ASCII hex) followed by the
    /// canonical payload bytes.
    pub link_hash: Hex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digital_signature: Option<DigitalSignature>,
}

pub fn compute_link_hash(target_current_hash: &str, payload: &Map<String, Value>) -> Result<Hex64, CryptoError> {
    let payload_bytes = canonical::canonicalize(&Value::Object(payload.clone()))?;
    let mut input = Vec::with_capacity(target_current_hash.len() + payload_bytes.len());
    input.extend_from_slice(target_current_hash.as_bytes());
    input.extend_from_slice(&payload_bytes);
    Ok(Hex64::parse(&sha256_hex(&input)).expect("sha-256 hex"))
}

/// Create an enrichment against a sealed target. The target is only read.
pub fn create_enrichment(
    target: &DecisionEvent,
    kind: &str,
    payload: Map<String, Value>,
    created_at: EventTime,
) -> Result<EnrichmentRecord, EnrichmentError> {
    let Some(current_hash) = target.current_hash() else {
        return Err(EnrichmentError::TargetUnsealed);
    };
    let decision_id = target
        .decision_id()
        .ok_or(EnrichmentError::TargetMissingId)?;
    if kind != KIND_GROUND_TRUTH && kind != KIND_QUALITY_UPDATE && !tokens::is_namespaced(kind) {
        return Err(EnrichmentError::KindInvalid(kind.to_string()));
    }
    let payload_value = Value::Object(payload);
    if let Some(path) = event::find_null(&payload_value, &mut String::new()) {
        return Err(EnrichmentError::NullInPayload(path));
    }
    let Value::Object(payload) = payload_value else { unreachable!() };

    let link_hash = compute_link_hash(current_hash, &payload)?;
    Ok(EnrichmentRecord {
        enrichment_id: UuidString::from_uuid(uuid::Uuid::from_bytes(rand::random())),
        decision_id: UuidString::parse(decision_id).expect("target id validated at parse"),
        kind: kind.to_string(),
        payload,
        created_at,
        link_hash,
        digital_signature: None,
    })
}

/// True when the enrichment is bound to this exact sealed form.
pub fn verify_link(record: &EnrichmentRecord, target: &DecisionEvent) -> Result<bool, EnrichmentError> {
    let Some(current_hash) = target.current_hash() else {
        return Err(EnrichmentError::TargetUnsealed);
    };
    let expected = compute_link_hash(current_hash, &record.payload)?;
    Ok(expected == record.link_hash)
}

/// Read-only merged view: the base event plus enrichments ordered by
/// creation time (ties broken by enrichment_id).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnrichedView<'a> {
    pub event: &'a DecisionEvent,
    pub enrichments: Vec<&'a EnrichmentRecord>,
}

pub fn resolve_view<'a>(
    target: &'a DecisionEvent,
    enrichments: &'a [EnrichmentRecord],
) -> Result<EnrichedView<'a>, EnrichmentError> {
    let target_id = target.decision_id().ok_or(EnrichmentError::TargetMissingId)?;
    let mut ordered: Vec<&EnrichmentRecord> = Vec::with_capacity(enrichments.len());
    for record in enrichments {
        if record.decision_id.as_str() != target_id {
            return Err(EnrichmentError::DecisionMismatch {
                enrichment_id: record.enrichment_id.to_string(),
                expected: record.decision_id.to_string(),
                found: target_id.to_string(),
            });
        }
        if !verify_link(record, target)? {
            return Err(EnrichmentError::StaleEnrichment {
                enrichment_id: record.enrichment_id.to_string(),
                decision_id: target_id.to_string(),
            });
        }
        ordered.push(record);
    }
    ordered.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then_with(|| a.enrichment_id.as_str().cmp(b.enrichment_id.as_str()))
    });
    Ok(EnrichedView {
        event: target,
        enrichments: ordered,
    })
}

/// Enrichments are independently signable: the signature covers the
/// canonical record excluding `signature_value`.
pub fn sign_enrichment(record: &EnrichmentRecord, signer: &EventSigner) -> Result<DigitalSignature, CryptoError> {
    let mut signed = record.clone();
    signed.digital_signature = Some(DigitalSignature {
        signer_id: Some(signer.signer_id.clone()),
        signature_value: None,
        algorithm: Some(crypto::SIG_ALG_ED25519.to_string()),
        certificate_ref: signer.certificate_ref.clone(),
        extensions: Default::default(),
    });
    let mut view = serde_json::to_value(&signed).expect("record serializes");
    if let Some(sig) = view.get_mut("digital_signature").and_then(Value::as_object_mut) {
        sig.remove("signature_value");
    }
    let bytes = canonical::canonicalize(&view)?;
    use ed25519_dalek::Signer as _;
    let raw = signer.signing_key().sign(&bytes);
    let mut signature = signed.digital_signature.expect("attached above");
    signature.signature_value = Some(crate::event::Base64String::encode(&raw.to_bytes()));
    Ok(signature)
}

pub fn verify_enrichment_signature(
    record: &EnrichmentRecord,
    public_key: &ed25519_dalek::VerifyingKey,
) -> Result<bool, CryptoError> {
    let Some(sig) = record.digital_signature.as_ref() else {
        return Err(CryptoError::MissingSignature);
    };
    let Some(value) = sig.signature_value.as_ref() else {
        return Err(CryptoError::MissingSignature);
    };
    let raw = value.decode();
    let Ok(raw64): Result<[u8; 64], _> = raw.try_into() else {
        return Ok(false);
    };
    let mut view = serde_json::to_value(record).expect("record serializes");
    if let Some(s) = view.get_mut("digital_signature").and_then(Value::as_object_mut) {
        s.remove("signature_value");
    }
    let bytes = canonical::canonicalize(&view)?;
    use ed25519_dalek::Verifier as _;
    Ok(public_key
        .verify(&bytes, &ed25519_dalek::Signature::from_bytes(&raw64))
        .is_ok())
}

/// Parse one enrichment record from its wire bytes.
pub fn parse_enrichment(wire: &[u8]) -> Result<EnrichmentRecord, ParseError> {
    let text = std::str::from_utf8(wire).map_err(|e| ParseError::Syntax {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".to_string(),
    })?;
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        offset: 0,
        message: e.to_string(),
    })?;
    if let Some(path) = event::find_null(&value, &mut String::new()) {
        return Err(ParseError::NullForbidden { path });
    }
    serde_path_to_error::deserialize(value).map_err(|e| ParseError::Format {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Canonical wire bytes for storage.
pub fn serialize_enrichment(record: &EnrichmentRecord) -> Vec<u8> {
    let value = serde_json::to_value(record).expect("record serializes");
    canonical::canonicalize(&value).expect("records hold no non-representable numbers")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{seal_and_append, ChainStreamState};
    use crate::event::new_minimal_event;
    use crate::tokens::EvidenceTier;
    use serde_json::json;

    const TS: &str = "2026-03-14T09:26:53.589Z";

    fn sealed_event() -> DecisionEvent {
        let draft = new_minimal_event(
            "7b1d2f7e-4a62-4b9b-9f6e-2f4e5d6a7b8c",
            "risk_scoring",
            "ml_inference",
            json!({"score": 0.4}),
            false,
            TS,
            EvidenceTier::Lightweight,
        )
        .unwrap();
        let state = ChainStreamState::new("payments");
        seal_and_append(&state, draft, None).unwrap().0
    }

    fn payload() -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("ground_truth_arrival_timestamp".into(), json!("2026-03-15T00:00:00.000Z"));
        m.insert("observed_outcome".into(), json!("default"));
        m
    }

    #[test]
    fn enrichment_leaves_target_bytes_identical() {
        let target = sealed_event();
        let before = event::serialize_event(&target);
        let record =
            create_enrichment(&target, KIND_GROUND_TRUTH, payload(), EventTime::parse(TS).unwrap()).unwrap();
        assert_eq!(event::serialize_event(&target), before);
        assert!(verify_link(&record, &target).unwrap());
        let view = resolve_view(&target, std::slice::from_ref(&record)).unwrap();
        assert_eq!(view.enrichments.len(), 1);
    }

    #[test]
    fn unsealed_target_rejected() {
        let draft = new_minimal_event(
            "7b1d2f7e-4a62-4b9b-9f6e-2f4e5d6a7b8c",
            "risk_scoring",
            "ml_inference",
            json!(1),
            false,
            TS,
            EvidenceTier::Lightweight,
        )
        .unwrap();
        assert!(matches!(
            create_enrichment(&draft, KIND_GROUND_TRUTH, payload(), EventTime::parse(TS).unwrap()),
            Err(EnrichmentError::TargetUnsealed)
        ));
    }

    #[test]
    fn two_enrichments_accumulate_with_distinct_ids() {
        let target = sealed_event();
        let at = EventTime::parse(TS).unwrap();
        let a = create_enrichment(&target, KIND_GROUND_TRUTH, payload(), at).unwrap();
        let b = create_enrichment(&target, KIND_QUALITY_UPDATE, payload(), at).unwrap();
        assert_ne!(a.enrichment_id, b.enrichment_id);
        assert_eq!(a.decision_id, b.decision_id);
        let records = vec![a, b];
        let view = resolve_view(&target, &records).unwrap();
        assert_eq!(view.enrichments.len(), 2);
    }

    #[test]
    fn stale_link_detected() {
        let target = sealed_event();
        let mut record =
            create_enrichment(&target, KIND_GROUND_TRUTH, payload(), EventTime::parse(TS).unwrap()).unwrap();
        record.link_hash = Hex64::parse(&sha256_hex(b"other form")).unwrap();
        assert!(matches!(
            resolve_view(&target, std::slice::from_ref(&record)),
            Err(EnrichmentError::StaleEnrichment { .. })
        ));
    }

    #[test]
    fn empty_enrichment_list_is_identity_view() {
        let target = sealed_event();
        let view = resolve_view(&target, &[]).unwrap();
        assert!(view.enrichments.is_empty());
        assert_eq!(view.event, &target);
    }

    #[test]
    fn namespaced_kinds_allowed_bare_unknown_rejected() {
        let target = sealed_event();
        let at = EventTime::parse(TS).unwrap();
        assert!(create_enrichment(&target, "clinical:follow_up", payload(), at).is_ok());
        assert!(matches!(
            create_enrichment(&target, "follow_up", payload(), at),
            Err(EnrichmentError::KindInvalid(_))
        ));
    }

    #[test]
    fn wire_round_trip() {
        let target = sealed_event();
        let record =
            create_enrichment(&target, KIND_GROUND_TRUTH, payload(), EventTime::parse(TS).unwrap()).unwrap();
        let bytes = serialize_enrichment(&record);
        assert_eq!(parse_enrichment(&bytes).unwrap(), record);
    }

    #[test]
    fn signatures_cover_the_record() {
        let target = sealed_event();
        let signer = EventSigner::from_seed_hex(
            "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f",
            "auditor-1",
            None,
        )
        .unwrap();
        let mut record =
            create_enrichment(&target, KIND_GROUND_TRUTH, payload(), EventTime::parse(TS).unwrap()).unwrap();
        record.digital_signature = Some(sign_enrichment(&record, &signer).unwrap());
        assert!(verify_enrichment_signature(&record, &signer.verifying_key()).unwrap());
        record.kind = KIND_QUALITY_UPDATE.into();
        assert!(!verify_enrichment_signature(&record, &signer.verifying_key()).unwrap());
    }
}
