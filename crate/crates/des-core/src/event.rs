//! The decision event record model and its wire form.
//!
//! Events are parsed leniently with respect to field *presence* (the
//! validator owns required-field and conditional rules) but strictly with
//! respect to field *format*: explicit nulls, malformed UUIDs, non-UTC or
//! non-millisecond timestamps, bad hex digests, and out-of-range scores are
//! rejected at parse time rather than silently normalized.
//!
//! Unknown keys are preserved at every level and participate in hashing.
//! `parse_event(serialize_event(e))` is structurally identical to `e`.

use crate::canonical;
use crate::tokens::{self, EvidenceTier};
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("explicit null at {path}: absence is expressed by key omission")]
    NullForbidden { path: String },
    #[error("invalid field at {path}: {message}")]
    Format { path: String, message: String },
}

/// Errors from programmatic constructors.
#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid {field} token {token:?}: {reason}")]
    EnumViolation {
        field: &'static str,
        token: String,
        reason: String,
    },
    #[error("invalid {field}: {reason}")]
    Format { field: &'static str, reason: String },
    #[error("null inside {field}: absence is expressed by key omission")]
    NullForbidden { field: &'static str },
}

// ---------------------------------------------------------------------------
// Validated scalar newtypes
// ---------------------------------------------------------------------------

/// Lowercase hyphenated RFC 4122 UUID, any version.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UuidString(String);

impl UuidString {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parsed = uuid::Uuid::try_parse(s).map_err(|e| format!("not an RFC 4122 UUID: {e}"))?;
        let normalized = parsed.hyphenated().to_string();
        if normalized != s {
            return Err("UUID must be lowercase hyphenated form".to_string());
        }
        Ok(UuidString(s.to_string()))
    }

    pub fn from_uuid(u: uuid::Uuid) -> Self {
        UuidString(u.hyphenated().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UuidString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for UuidString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for UuidString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        UuidString::parse(&s).map_err(D::Error::custom)
    }
}

/// RFC 3339 UTC timestamp with exactly millisecond precision and a trailing
/// `Z`. Other offsets or precisions are rejected, not normalized, so sealed
/// bytes stay deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventTime(DateTime<Utc>);

impl EventTime {
    pub fn parse(s: &str) -> Result<Self, String> {
        let b = s.as_bytes();
        let shape_ok = b.len() == 24
            && b[4] == b'-'
            && b[7] == b'-'
            && b[10] == b'T'
            && b[13] == b':'
            && b[16] == b':'
            && b[19] == b'.'
            && b[23] == b'Z'
            && b.iter().enumerate().all(|(i, c)| {
                matches!(i, 4 | 7 | 10 | 13 | 16 | 19 | 23) || c.is_ascii_digit()
            });
        if !shape_ok {
            return Err(format!(
                "expected RFC 3339 UTC with millisecond precision (YYYY-MM-DDTHH:MM:SS.mmmZ), got {s:?}"
            ));
        }
        let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.3fZ")
            .map_err(|e| format!("invalid timestamp {s:?}: {e}"))?;
        Ok(EventTime(DateTime::from_naive_utc_and_offset(naive, Utc)))
    }

    /// Current time truncated to millisecond precision.
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    /// Truncates sub-millisecond precision so the wire form is exact.
    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        let millis = dt.timestamp_millis();
        EventTime(DateTime::from_timestamp_millis(millis).expect("in-range timestamp"))
    }

    pub fn from_timestamp_millis(millis: i64) -> Option<Self> {
        DateTime::from_timestamp_millis(millis).map(EventTime)
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }
}

impl fmt::Display for EventTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%S%.3fZ"))
    }
}

impl Serialize for EventTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for EventTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        EventTime::parse(&s).map_err(D::Error::custom)
    }
}

/// Exactly 64 lowercase hex characters (a SHA-256 digest on the wire).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hex64(String);

impl Hex64 {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            Ok(Hex64(s.to_string()))
        } else {
            Err("expected 64 lowercase hex characters".to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Hex64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Hex64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Hex64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hex64::parse(&s).map_err(D::Error::custom)
    }
}

/// Nonempty lowercase hex of unconstrained length (configuration and
/// feature-vector digests).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LowerHex(String);

impl LowerHex {
    pub fn parse(s: &str) -> Result<Self, String> {
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            Ok(LowerHex(s.to_string()))
        } else {
            Err("expected nonempty lowercase hex".to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Serialize for LowerHex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LowerHex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        LowerHex::parse(&s).map_err(D::Error::custom)
    }
}

/// A real in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score(f64);

impl Score {
    pub fn new(v: f64) -> Result<Self, String> {
        if v.is_finite() && (0.0..=1.0).contains(&v) {
            Ok(Score(v))
        } else {
            Err(format!("score {v} outside [0, 1]"))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Score::new(v).map_err(D::Error::custom)
    }
}

/// Standard padded base64 payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Base64String(String);

impl Base64String {
    pub fn parse(s: &str) -> Result<Self, String> {
        use base64::Engine as _;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(|e| format!("invalid base64: {e}"))?;
        Ok(Base64String(s.to_string()))
    }

    pub fn encode(bytes: &[u8]) -> Self {
        use base64::Engine as _;
        Base64String(base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn decode(&self) -> Vec<u8> {
        use base64::Engine as _;
        base64::engine::general_purpose::STANDARD
            .decode(&self.0)
            .expect("validated at construction")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Serialize for Base64String {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Base64String {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Base64String::parse(&s).map_err(D::Error::custom)
    }
}

/// `YYYY-MM-DD` calendar date (component calibration dates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CalendarDate(NaiveDate);

impl CalendarDate {
    pub fn parse(s: &str) -> Result<Self, String> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(CalendarDate)
            .map_err(|e| format!("expected YYYY-MM-DD date: {e}"))
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl Serialize for CalendarDate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CalendarDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CalendarDate::parse(&s).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

/// The atomic governance record. Field presence is validated by the rule
/// engine, not the type, so structurally incomplete documents can still be
/// parsed and reported on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_context: Option<DecisionContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_logic: Option<DecisionLogic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_boundary: Option<DecisionBoundary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_quality_indicators: Option<QualityIndicators>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_override_record: Option<HumanOverrideRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_metadata: Option<TemporalMetadata>,
    /// Namespaced extension keys, preserved verbatim. They participate in
    /// canonicalization and therefore in hashing.
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_id: Option<UuidString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<InputRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub input_id: String,
    pub input_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_version: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Names the hash-chain stream this event seals into.
    pub system_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configuration_hash: Option<LowerHex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deployment_id: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_path: Option<Vec<RulePathEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_inference: Option<ModelInference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_evaluation: Option<PolicyEvaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination_method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_alternatives: Option<Vec<Value>>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePathEntry {
    pub rule_id: String,
    pub rule_version: String,
    pub rule_result: String,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelInference {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_vector_hash: Option<LowerHex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<Score>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_engine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_result: Option<Value>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionBoundary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_decisions: Option<Vec<UpstreamRef>>,
    /// May be an empty array in fully decoupled pub/sub deployments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream_consumers: Option<Vec<DownstreamRef>>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpstreamRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_id: Option<UuidString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_contract: Option<BoundaryContract>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DownstreamRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_contract: Option<BoundaryContract>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryContract {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_contract: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityIndicators {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_score: Option<Score>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_components: Option<Vec<ConfidenceComponent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_quality: Option<DataQuality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_risk_level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_alerts: Option<Vec<ThresholdAlert>>,
    /// Domain-specific quality metrics are accepted as additional keys.
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceComponent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<Score>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_date: Option<CalendarDate>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataQuality {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completeness: Option<Score>,
    /// Age of the most stale input, in whole seconds (wire name `freshness`).
    #[serde(rename = "freshness", default, skip_serializing_if = "Option::is_none")]
    pub freshness_seconds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_issues: Option<Vec<String>>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAlert {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Value>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HumanOverrideRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_occurred: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_actor: Option<OverrideActor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_output: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overridden_output: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_rationale: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_timestamp: Option<EventTime>,
    /// Duration between system output and human action, in whole
    /// milliseconds (wire name `time_to_override`).
    #[serde(rename = "time_to_override", default, skip_serializing_if = "Option::is_none")]
    pub time_to_override_ms: Option<u64>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverrideActor {
    /// Pseudonymized by default; never a direct personal identifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authorization_level: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemporalMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_timestamp: Option<EventTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processing_duration_ms: Option<u64>,
    /// Strictly monotone within a stream; assigned at sealing, starting at 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_number: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_chain: Option<HashChain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_tier: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digital_signature: Option<DigitalSignature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention_policy: Option<RetentionPolicy>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HashChain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_hash: Option<Hex64>,
    /// Absent until sealed; once set, the record is immutable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_hash: Option<Hex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DigitalSignature {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signer_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature_value: Option<Base64String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_ref: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetentionPolicy {
    /// ISO 8601 duration, e.g. `P6M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimum_retention: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extensions: Map<String, Value>,
}

// ---------------------------------------------------------------------------
// Parse / serialize
// ---------------------------------------------------------------------------

/// Parse one UTF-8 JSON document into a typed event.
///
/// Key order is not normalized here; canonicalization is a separate step.
pub fn parse_event(wire: &[u8]) -> Result<DecisionEvent, ParseError> {
    let text = std::str::from_utf8(wire).map_err(|e| ParseError::Syntax {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".to_string(),
    })?;
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    event_from_value(value)
}

/// Typed extraction from an already parsed JSON value.
pub fn event_from_value(value: Value) -> Result<DecisionEvent, ParseError> {
    if let Some(path) = find_null(&value, &mut String::new()) {
        return Err(ParseError::NullForbidden { path });
    }
    let de = value;
    serde_path_to_error::deserialize(de).map_err(|e| ParseError::Format {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Serialize an event to its canonical wire bytes.
///
/// The output is the RFC 8785 form: it is what gets stored, hashed, and
/// served. `parse_event` of the result reproduces the event structurally.
pub fn serialize_event(event: &DecisionEvent) -> Vec<u8> {
    let value = event.to_value();
    debug_assert!(find_null(&value, &mut String::new()).is_none(), "event holds explicit null");
    canonical::canonicalize(&value).expect("typed events hold no non-representable numbers")
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in text.split('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    offset
}

/// Depth-first scan for explicit nulls; returns the dotted path of the first
/// hit (array indices appear as numeric segments).
pub fn find_null(value: &Value, path: &mut String) -> Option<String> {
    match value {
        Value::Null => Some(if path.is_empty() { "$".to_string() } else { path.clone() }),
        Value::Object(map) => {
            for (k, v) in map {
                let len = path.len();
                if !path.is_empty() {
                    path.push('.');
                }
                path.push_str(k);
                if let Some(hit) = find_null(v, path) {
                    return Some(hit);
                }
                path.truncate(len);
            }
            None
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                let len = path.len();
                if !path.is_empty() {
                    path.push('.');
                }
                path.push_str(&i.to_string());
                if let Some(hit) = find_null(v, path) {
                    return Some(hit);
                }
                path.truncate(len);
            }
            None
        }
        _ => None,
    }
}

impl DecisionEvent {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("event serializes to JSON")
    }

    pub fn decision_id(&self) -> Option<&str> {
        self.decision_context
            .as_ref()?
            .decision_id
            .as_ref()
            .map(UuidString::as_str)
    }

    pub fn decision_type(&self) -> Option<&str> {
        self.decision_context.as_ref()?.decision_type.as_deref()
    }

    pub fn logic_type(&self) -> Option<&str> {
        self.decision_logic.as_ref()?.logic_type.as_deref()
    }

    pub fn output(&self) -> Option<&Value> {
        self.decision_logic.as_ref()?.output.as_ref()
    }

    pub fn override_occurred(&self) -> Option<bool> {
        self.human_override_record.as_ref()?.override_occurred
    }

    pub fn tier_token(&self) -> Option<&str> {
        self.temporal_metadata.as_ref()?.evidence_tier.as_deref()
    }

    pub fn tier(&self) -> Option<EvidenceTier> {
        self.tier_token()?.parse().ok()
    }

    pub fn sequence_number(&self) -> Option<u64> {
        self.temporal_metadata.as_ref()?.sequence_number
    }

    pub fn event_timestamp(&self) -> Option<&EventTime> {
        self.temporal_metadata.as_ref()?.event_timestamp.as_ref()
    }

    pub fn current_hash(&self) -> Option<&str> {
        self.temporal_metadata
            .as_ref()?
            .hash_chain
            .as_ref()?
            .current_hash
            .as_ref()
            .map(Hex64::as_str)
    }

    pub fn previous_hash(&self) -> Option<&str> {
        self.temporal_metadata
            .as_ref()?
            .hash_chain
            .as_ref()?
            .previous_hash
            .as_ref()
            .map(Hex64::as_str)
    }

    /// A record is sealed once `current_hash` is set.
    pub fn is_sealed(&self) -> bool {
        self.current_hash().is_some()
    }

    pub fn system_id(&self) -> Option<&str> {
        self.decision_context
            .as_ref()?
            .environment
            .as_ref()
            .map(|e| e.system_id.as_str())
    }
}

/// Construct the smallest draft that satisfies the lightweight-tier rules
/// (for non-human logic without an override). Sequence number and hash
/// chain are filled at sealing.
#[allow(clippy::too_many_arguments)]
pub fn new_minimal_event(
    decision_id: &str,
    decision_type: &str,
    logic_type: &str,
    output: Value,
    override_occurred: bool,
    event_timestamp: &str,
    evidence_tier: EvidenceTier,
) -> Result<DecisionEvent, BuildError> {
    let decision_id = UuidString::parse(decision_id).map_err(|reason| BuildError::Format {
        field: "decision_id",
        reason,
    })?;
    let is_core = tokens::CORE_LOGIC_TYPES.contains(&logic_type);
    let ns_ok = tokens::is_namespaced(logic_type)
        && !tokens::CORE_LOGIC_TYPES.contains(&tokens::namespace_prefix(logic_type).unwrap_or(""));
    if !is_core && !ns_ok {
        return Err(BuildError::EnumViolation {
            field: "logic_type",
            token: logic_type.to_string(),
            reason: "must be a core member or a namespaced extension whose prefix is not a core member"
                .to_string(),
        });
    }
    if decision_type.contains(':') && !tokens::is_namespaced(decision_type) {
        return Err(BuildError::EnumViolation {
            field: "decision_type",
            token: decision_type.to_string(),
            reason: "colon-bearing values must match the namespace pattern".to_string(),
        });
    }
    if find_null(&output, &mut String::new()).is_some() {
        return Err(BuildError::NullForbidden { field: "output" });
    }
    let event_timestamp = EventTime::parse(event_timestamp).map_err(|reason| BuildError::Format {
        field: "event_timestamp",
        reason,
    })?;

    Ok(DecisionEvent {
        schema_version: Some(SCHEMA_VERSION.to_string()),
        decision_context: Some(DecisionContext {
            decision_id: Some(decision_id),
            decision_type: Some(decision_type.to_string()),
            ..Default::default()
        }),
        decision_logic: Some(DecisionLogic {
            logic_type: Some(logic_type.to_string()),
            output: Some(output),
            ..Default::default()
        }),
        human_override_record: Some(HumanOverrideRecord {
            override_occurred: Some(override_occurred),
            ..Default::default()
        }),
        temporal_metadata: Some(TemporalMetadata {
            event_timestamp: Some(event_timestamp),
            evidence_tier: Some(evidence_tier.as_str().to_string()),
            ..Default::default()
        }),
        ..Default::default()
    })
}

/// Schema version stamped on constructed events.
pub const SCHEMA_VERSION: &str = "0.3.0";
