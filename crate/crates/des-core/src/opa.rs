//! Open Policy Agent decision-log conversion.
//!
//! OPA's decision log fields (decision_id, path, input, result, timestamp)
//! map directly onto the policy-evaluation shape; everything OPA-specific
//! that has no native home (labels, bundles, metrics, nd_builtin_cache) is
//! preserved under the `opa:` extension namespace so the conversion is
//! lossless. Converted drafts default to the sampled tier, where the
//! policy-evaluation sub-object is actually validated.

use crate::crypto;
use crate::event::{
    DecisionContext, DecisionEvent, DecisionLogic, Environment, EventTime, HumanOverrideRecord,
    InputRecord, PolicyEvaluation, QualityIndicators, TemporalMetadata, UuidString,
    SCHEMA_VERSION,
};
use crate::tokens::EvidenceTier;
use crate::validator::{self, ValidationReport};
use serde::Deserialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConversionError {
    #[error("decision log entry has no decision_id")]
    MissingDecisionId,
    #[error("decision log entry has no path")]
    MissingPath,
    #[error("decision_id {0:?} is not a UUID")]
    InvalidDecisionId(String),
    #[error("timestamp {0:?} does not parse as RFC 3339")]
    BadTimestamp(String),
    #[error("converted draft fails validation ({} violations)", report.violations.len())]
    Invalid { report: Box<ValidationReport> },
    #[error("decision log does not parse: {0}")]
    Parse(String),
}

/// One OPA decision-log entry; unknown fields are retained.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct OpaDecisionLogEntry {
    pub decision_id: Option<String>,
    pub path: Option<String>,
    pub input: Option<Value>,
    pub result: Option<Value>,
    pub timestamp: Option<String>,
    pub labels: Option<Map<String, Value>>,
    pub bundles: Option<Map<String, Value>>,
    #[serde(flatten)]
    pub rest: Map<String, Value>,
}

#[derive(Debug, Clone)]
pub struct OpaConversionConfig {
    pub evidence_tier: EvidenceTier,
    pub decision_type: String,
    pub decision_risk_level: String,
    /// Stream identity when the entry's labels carry no `id`.
    pub fallback_system_id: String,
    /// Record input values as digests instead of raw values.
    pub hash_inputs: bool,
    /// Key the input digests (HMAC); unkeyed SHA-256 otherwise.
    pub deployment_key: Option<String>,
}

impl Default for OpaConversionConfig {
    fn default() -> Self {
        OpaConversionConfig {
            evidence_tier: EvidenceTier::Sampled,
            decision_type: "policy_enforcement".to_string(),
            decision_risk_level: "low".to_string(),
            fallback_system_id: "opa".to_string(),
            hash_inputs: false,
            deployment_key: None,
        }
    }
}

/// Parse an OPA decision log given as NDJSON or as a JSON array.
pub fn parse_opa_log(bytes: &[u8]) -> Result<Vec<OpaDecisionLogEntry>, ConversionError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ConversionError::Parse(e.to_string()))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| ConversionError::Parse(e.to_string()));
    }
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(line)
            .map_err(|e| ConversionError::Parse(format!("line {}: {e}", lineno + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

fn hashed_input_value(value: &Value, cfg: &OpaConversionConfig) -> Value {
    let digest = match cfg.deployment_key.as_deref() {
        Some(key) if !key.is_empty() => crypto::hash_sensitive_value(value, key),
        _ => crypto::hash_value_unkeyed(value),
    };
    match digest {
        Ok(hex) => Value::String(hex),
        Err(_) => value.clone(),
    }
}

fn input_records(entry: &OpaDecisionLogEntry, cfg: &OpaConversionConfig) -> Option<Vec<InputRecord>> {
    let input = entry.input.as_ref()?;
    let source = "opa".to_string();
    let record = |id: String, value: &Value| InputRecord {
        input_id: id,
        input_type: "external_data".to_string(),
        input_value: Some(if cfg.hash_inputs {
            hashed_input_value(value, cfg)
        } else {
            value.clone()
        }),
        input_source: Some(source.clone()),
        input_version: None,
        extensions: Default::default(),
    };
    let records = match input {
        Value::Object(map) => map.iter().map(|(k, v)| record(format!("input.{k}"), v)).collect(),
        other => vec![record("input".to_string(), other)],
    };
    Some(records)
}

fn first_bundle_revision(bundles: &Map<String, Value>) -> Option<String> {
    let mut names: Vec<&String> = bundles.keys().collect();
    names.sort();
    for name in names {
        if let Some(rev) = bundles[name.as_str()].get("revision").and_then(Value::as_str) {
            return Some(rev.to_string());
        }
    }
    None
}

/// Normalize an RFC 3339 timestamp of any precision/offset to the
/// millisecond-UTC wire form. Conversion constructs new drafts, so
/// normalizing here does not touch sealed bytes.
fn normalize_timestamp(ts: &str) -> Option<EventTime> {
    let parsed = chrono::DateTime::parse_from_rfc3339(ts).ok()?;
    Some(EventTime::from_datetime(parsed.with_timezone(&chrono::Utc)))
}

fn ns_key(key: &str) -> Option<String> {
    let lowered = key.to_ascii_lowercase();
    let mut chars = lowered.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return None,
    }
    if chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.' || c == '-') {
        Some(format!("opa:{lowered}"))
    } else {
        None
    }
}

/// Convert one entry into a DES draft and validate it at the configured
/// tier. Mapped fields (path, result, decision_id) stay recoverable.
pub fn convert_opa_decision(
    entry: &OpaDecisionLogEntry,
    cfg: &OpaConversionConfig,
) -> Result<DecisionEvent, ConversionError> {
    let decision_id = entry.decision_id.as_deref().ok_or(ConversionError::MissingDecisionId)?;
    let decision_id = UuidString::parse(decision_id)
        .map_err(|_| ConversionError::InvalidDecisionId(decision_id.to_string()))?;
    let path = entry.path.as_deref().ok_or(ConversionError::MissingPath)?;

    let event_timestamp = match entry.timestamp.as_deref() {
        Some(ts) => Some(normalize_timestamp(ts).ok_or_else(|| ConversionError::BadTimestamp(ts.to_string()))?),
        None => None,
    };

    let labels = entry.labels.clone().unwrap_or_default();
    let system_id = labels
        .get("id")
        .and_then(Value::as_str)
        .unwrap_or(&cfg.fallback_system_id)
        .to_string();
    let system_version = labels.get("version").and_then(Value::as_str).map(str::to_string);
    let policy_version = entry
        .bundles
        .as_ref()
        .and_then(first_bundle_revision)
        .or_else(|| labels.get("revision").and_then(Value::as_str).map(str::to_string));

    let mut extensions: Map<String, Value> = Map::new();
    if let Some(l) = entry.labels.as_ref() {
        extensions.insert("opa:labels".into(), Value::Object(l.clone()));
    }
    if let Some(b) = entry.bundles.as_ref() {
        extensions.insert("opa:bundles".into(), Value::Object(b.clone()));
    }
    let mut extra = Map::new();
    for (key, value) in &entry.rest {
        match ns_key(key) {
            Some(k) => {
                extensions.insert(k, value.clone());
            }
            None => {
                extra.insert(key.clone(), value.clone());
            }
        }
    }
    if !extra.is_empty() {
        extensions.insert("opa:extra".into(), Value::Object(extra));
    }

    let draft = DecisionEvent {
        schema_version: Some(SCHEMA_VERSION.to_string()),
        decision_context: Some(DecisionContext {
            decision_id: Some(decision_id),
            decision_type: Some(cfg.decision_type.clone()),
            trigger: Some("external_request".to_string()),
            inputs: input_records(entry, cfg),
            environment: Some(Environment {
                system_id,
                system_version,
                configuration_hash: None,
                deployment_id: None,
                extensions: Default::default(),
            }),
            extensions: Default::default(),
        }),
        decision_logic: Some(DecisionLogic {
            logic_type: Some("policy_evaluation".to_string()),
            policy_evaluation: Some(PolicyEvaluation {
                policy_id: Some(path.to_string()),
                policy_version,
                policy_engine: Some("OPA".to_string()),
                evaluation_result: entry.result.clone(),
                extensions: Default::default(),
            }),
            output: entry.result.clone(),
            ..Default::default()
        }),
        decision_quality_indicators: Some(QualityIndicators {
            decision_risk_level: Some(cfg.decision_risk_level.clone()),
            ..Default::default()
        }),
        human_override_record: Some(HumanOverrideRecord {
            override_occurred: Some(false),
            ..Default::default()
        }),
        temporal_metadata: Some(TemporalMetadata {
            event_timestamp,
            evidence_tier: Some(cfg.evidence_tier.as_str().to_string()),
            ..Default::default()
        }),
        extensions,
        ..Default::default()
    };

    let report = validator::validate_draft(&draft);
    if !report.valid {
        return Err(ConversionError::Invalid {
            report: Box::new(report),
        });
    }
    Ok(draft)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn entry(raw: Value) -> OpaDecisionLogEntry {
        serde_json::from_value(raw).unwrap()
    }

    fn minimal_entry() -> OpaDecisionLogEntry {
        entry(json!({
            "decision_id": "067e6162-3b6f-4ae2-a171-2470b63dff00",
            "path": "authz/allow",
            "input": {"user": "alice", "action": "read"},
            "result": true,
            "timestamp": "2026-03-14T09:26:53.589123456Z",
            "labels": {"id": "opa-sidecar-1", "version": "0.62.0"}
        }))
    }

    #[test]
    fn minimal_entry_converts_to_valid_sampled_draft() {
        let cfg = OpaConversionConfig::default();
        let draft = convert_opa_decision(&minimal_entry(), &cfg).unwrap();
        assert_eq!(draft.tier(), Some(EvidenceTier::Sampled));
        assert_eq!(draft.logic_type(), Some("policy_evaluation"));
        let policy = draft.decision_logic.as_ref().unwrap().policy_evaluation.as_ref().unwrap();
        assert_eq!(policy.policy_id.as_deref(), Some("authz/allow"));
        assert_eq!(policy.policy_engine.as_deref(), Some("OPA"));
        assert_eq!(policy.evaluation_result, Some(json!(true)));
        assert_eq!(draft.output(), Some(&json!(true)));
        assert_eq!(draft.system_id(), Some("opa-sidecar-1"));
        assert!(validator::validate_draft(&draft).valid);
    }

    #[test]
    fn missing_result_is_a_conversion_error_via_validation() {
        let mut e = minimal_entry();
        e.result = None;
        match convert_opa_decision(&e, &OpaConversionConfig::default()) {
            Err(ConversionError::Invalid { report }) => {
                assert!(report.violations.iter().any(|v| v.path == "decision_logic.output"));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn missing_id_or_path_rejected() {
        let mut e = minimal_entry();
        e.decision_id = None;
        assert!(matches!(
            convert_opa_decision(&e, &OpaConversionConfig::default()),
            Err(ConversionError::MissingDecisionId)
        ));
        let mut e = minimal_entry();
        e.path = None;
        assert!(matches!(
            convert_opa_decision(&e, &OpaConversionConfig::default()),
            Err(ConversionError::MissingPath)
        ));
    }

    #[test]
    fn bundle_revision_becomes_policy_version() {
        let mut e = minimal_entry();
        e.bundles = Some(
            json!({"authz": {"revision": "rev-42"}})
                .as_object()
                .unwrap()
                .clone(),
        );
        let draft = convert_opa_decision(&e, &OpaConversionConfig::default()).unwrap();
        let policy = draft.decision_logic.as_ref().unwrap().policy_evaluation.as_ref().unwrap();
        assert_eq!(policy.policy_version.as_deref(), Some("rev-42"));
    }

    #[test]
    fn unmapped_fields_live_under_the_opa_namespace() {
        let e = entry(json!({
            "decision_id": "067e6162-3b6f-4ae2-a171-2470b63dff00",
            "path": "authz/allow",
            "result": false,
            "timestamp": "2026-03-14T09:26:53Z",
            "metrics": {"timer_rego_query_eval_ns": 45750},
            "req_id": 813,
            "nd_builtin_cache": {"http.send": {}}
        }));
        let draft = convert_opa_decision(&e, &OpaConversionConfig::default()).unwrap();
        assert!(draft.extensions.contains_key("opa:metrics"));
        assert!(draft.extensions.contains_key("opa:req_id"));
        assert!(draft.extensions.contains_key("opa:nd_builtin_cache"));
        // Extension keys pass the namespace syntax, so no R6 warnings.
        let report = validator::validate_draft(&draft);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    }

    #[test]
    fn sensitive_inputs_can_be_hashed() {
        let cfg = OpaConversionConfig {
            hash_inputs: true,
            deployment_key: Some("deployment-key-1".into()),
            ..OpaConversionConfig::default()
        };
        let draft = convert_opa_decision(&minimal_entry(), &cfg).unwrap();
        let inputs = draft.decision_context.as_ref().unwrap().inputs.as_ref().unwrap();
        assert_eq!(inputs.len(), 2);
        for input in inputs {
            let Some(Value::String(s)) = &input.input_value else {
                panic!("expected digest string")
            };
            assert_eq!(s.len(), 64);
        }
    }

    #[test]
    fn ndjson_and_array_logs_parse() {
        let nd = br#"{"decision_id":"067e6162-3b6f-4ae2-a171-2470b63dff00","path":"a","result":1,"timestamp":"2026-01-01T00:00:00Z"}
{"decision_id":"167e6162-3b6f-4ae2-a171-2470b63dff00","path":"b","result":2,"timestamp":"2026-01-01T00:00:01Z"}"#;
        assert_eq!(parse_opa_log(nd).unwrap().len(), 2);
        let arr = br#"[{"decision_id":"x","path":"a"}]"#;
        assert_eq!(parse_opa_log(arr).unwrap().len(), 1);
        assert!(parse_opa_log(b"not json").is_err());
    }
}
