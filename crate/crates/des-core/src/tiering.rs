//! Tier selection policy, tier projection, and payload-size accounting.
//!
//! Tier selection is a deployment-time configuration decision: the policy
//! routes overrides, threshold alerts, and risk levels to richer tiers and
//! samples a configurable fraction of the remainder into the sampled tier.
//! Sampling is keyed on `decision_id` and the policy seed, so the same
//! decision resolves to the same tier on every run.

use crate::crypto::{hash_value_unkeyed, sha256_hex};
use crate::event::{
    DecisionBoundary, DecisionContext, DecisionEvent, DecisionLogic, HumanOverrideRecord,
    QualityIndicators, UpstreamRef,
};
use crate::tokens::EvidenceTier;
use crate::{canonical, event};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("tier2_sample_rate {0} outside [0, 1]")]
    SampleRate(f64),
    #[error("policy file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Minimum tier per risk level; the policy file must cover all four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskTierMap {
    pub low: EvidenceTier,
    pub medium: EvidenceTier,
    pub high: EvidenceTier,
    pub critical: EvidenceTier,
}

impl RiskTierMap {
    pub fn tier_for(&self, risk: &str) -> Option<EvidenceTier> {
        match risk {
            "low" => Some(self.low),
            "medium" => Some(self.medium),
            "high" => Some(self.high),
            "critical" => Some(self.critical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierPolicy {
    pub default_tier: EvidenceTier,
    pub force_tier3_on_override: bool,
    pub force_tier3_on_alerts: bool,
    pub min_tier_for_risk: RiskTierMap,
    pub tier2_sample_rate: f64,
    pub seed: u64,
}

impl Default for TierPolicy {
    fn default() -> Self {
        TierPolicy {
            default_tier: EvidenceTier::Lightweight,
            force_tier3_on_override: true,
            force_tier3_on_alerts: true,
            min_tier_for_risk: RiskTierMap {
                low: EvidenceTier::Lightweight,
                medium: EvidenceTier::Lightweight,
                high: EvidenceTier::Sampled,
                critical: EvidenceTier::Full,
            },
            tier2_sample_rate: 0.0,
            seed: 0,
        }
    }
}

impl TierPolicy {
    pub fn from_json(bytes: &[u8]) -> Result<Self, PolicyError> {
        let policy: TierPolicy = serde_json::from_slice(bytes)?;
        policy.check()?;
        Ok(policy)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PolicyError> {
        Self::from_json(&std::fs::read(path)?)
    }

    pub fn check(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.tier2_sample_rate) || !self.tier2_sample_rate.is_finite() {
            return Err(PolicyError::SampleRate(self.tier2_sample_rate));
        }
        Ok(())
    }
}

/// Reproducible per-decision sampling: keyed hash of decision_id and seed
/// mapped to [0, 1).
fn sample_point(decision_id: &str, seed: u64) -> f64 {
    let mut input = Vec::with_capacity(decision_id.len() + 8);
    input.extend_from_slice(decision_id.as_bytes());
    input.extend_from_slice(&seed.to_le_bytes());
    let digest = sha256_hex(&input);
    let word = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
    (word >> 11) as f64 / (1u64 << 53) as f64
}

/// Resolve the evidence tier for a draft under a policy. Deterministic
/// given (draft, policy).
pub fn select_tier(draft: &DecisionEvent, policy: &TierPolicy) -> EvidenceTier {
    let mut tier = policy.default_tier;

    if policy.tier2_sample_rate > 0.0 {
        let id = draft.decision_id().unwrap_or("");
        if sample_point(id, policy.seed) < policy.tier2_sample_rate {
            tier = tier.max(EvidenceTier::Sampled);
        }
    }

    if let Some(risk) = draft
        .decision_quality_indicators
        .as_ref()
        .and_then(|q| q.decision_risk_level.as_deref())
    {
        if let Some(min) = policy.min_tier_for_risk.tier_for(risk) {
            tier = tier.max(min);
        }
    }

    let alerts_present = draft
        .decision_quality_indicators
        .as_ref()
        .and_then(|q| q.threshold_alerts.as_ref())
        .map(|a| !a.is_empty())
        .unwrap_or(false);
    if alerts_present {
        tier = tier.max(EvidenceTier::Sampled);
        if policy.force_tier3_on_alerts {
            tier = EvidenceTier::Full;
        }
    }

    let human_involved =
        draft.override_occurred() == Some(true) || draft.logic_type() == Some("human_decision");
    if human_involved && policy.force_tier3_on_override {
        tier = EvidenceTier::Full;
    }

    tier
}

/// Input values larger than this many canonical bytes are replaced by their
/// digest when projecting to the sampled tier.
pub const SAMPLED_INPUT_HASH_THRESHOLD: usize = 256;

/// Project a draft onto a target tier, keeping the fields that tier captures
/// plus everything the all-tier rules require (attribution, the override
/// triple, and the upstream override link for human-over-human events).
/// Projecting to `full` is the identity apart from the tier label.
pub fn project_to_tier(draft: &DecisionEvent, tier: EvidenceTier) -> DecisionEvent {
    let mut out = match tier {
        EvidenceTier::Full => draft.clone(),
        EvidenceTier::Sampled => project_sampled(draft),
        EvidenceTier::Lightweight => project_lightweight(draft),
    };
    if let Some(temporal) = out.temporal_metadata.as_mut() {
        temporal.evidence_tier = Some(tier.as_str().to_string());
    }
    out
}

fn mandatory_override_record(draft: &DecisionEvent) -> Option<HumanOverrideRecord> {
    let source = draft.human_override_record.as_ref()?;
    let occurred = source.override_occurred;
    let human = draft.logic_type() == Some("human_decision");
    let keep_attribution = human || occurred == Some(true);
    let keep_triple = occurred == Some(true);
    Some(HumanOverrideRecord {
        override_occurred: occurred,
        override_actor: keep_attribution.then(|| source.override_actor.clone()).flatten(),
        override_rationale: keep_attribution
            .then(|| source.override_rationale.clone())
            .flatten(),
        original_output: keep_triple.then(|| source.original_output.clone()).flatten(),
        overridden_output: keep_triple.then(|| source.overridden_output.clone()).flatten(),
        override_timestamp: keep_triple.then(|| source.override_timestamp).flatten(),
        ..Default::default()
    })
}

/// Human-over-human events must stay linked to the decision they override
/// at every tier, or the projection would stop validating.
fn separation_boundary(draft: &DecisionEvent) -> Option<DecisionBoundary> {
    if draft.logic_type() != Some("human_decision") || draft.override_occurred() != Some(true) {
        return None;
    }
    let ups = draft.decision_boundary.as_ref()?.upstream_decisions.as_ref()?;
    let links: Vec<UpstreamRef> = ups
        .iter()
        .filter(|u| u.coupling_type.as_deref() == Some("override"))
        .map(|u| UpstreamRef {
            decision_id: u.decision_id.clone(),
            system_id: u.system_id.clone(),
            coupling_type: u.coupling_type.clone(),
            ..Default::default()
        })
        .collect();
    if links.is_empty() {
        return None;
    }
    Some(DecisionBoundary {
        upstream_decisions: Some(links),
        ..Default::default()
    })
}

fn project_lightweight(draft: &DecisionEvent) -> DecisionEvent {
    DecisionEvent {
        schema_version: draft.schema_version.clone(),
        decision_context: draft.decision_context.as_ref().map(|c| DecisionContext {
            decision_id: c.decision_id.clone(),
            decision_type: c.decision_type.clone(),
            ..Default::default()
        }),
        decision_logic: draft.decision_logic.as_ref().map(|l| DecisionLogic {
            logic_type: l.logic_type.clone(),
            output: l.output.clone(),
            ..Default::default()
        }),
        decision_boundary: separation_boundary(draft),
        human_override_record: mandatory_override_record(draft),
        temporal_metadata: draft.temporal_metadata.clone(),
        ..Default::default()
    }
}

fn abbreviated_input_value(value: &Value) -> Value {
    let size = canonical::canonicalize(value).map(|b| b.len()).unwrap_or(usize::MAX);
    if size > SAMPLED_INPUT_HASH_THRESHOLD {
        Value::String(hash_value_unkeyed(value).expect("parsed values canonicalize"))
    } else {
        value.clone()
    }
}

fn project_sampled(draft: &DecisionEvent) -> DecisionEvent {
    let context = draft.decision_context.as_ref().map(|c| {
        let mut c = c.clone();
        if let Some(inputs) = c.inputs.as_mut() {
            for input in inputs.iter_mut() {
                if let Some(v) = input.input_value.as_ref() {
                    input.input_value = Some(abbreviated_input_value(v));
                }
            }
        }
        c
    });

    let logic = draft.decision_logic.as_ref().map(|l| {
        let hybrid = l.logic_type.as_deref() == Some("hybrid");
        let keep_model = matches!(l.logic_type.as_deref(), Some("ml_inference")) || hybrid;
        let keep_rules = matches!(l.logic_type.as_deref(), Some("rule_based")) || hybrid;
        let keep_policy = matches!(l.logic_type.as_deref(), Some("policy_evaluation")) || hybrid;
        DecisionLogic {
            logic_type: l.logic_type.clone(),
            rule_path: keep_rules.then(|| l.rule_path.clone()).flatten(),
            model_inference: keep_model.then(|| l.model_inference.clone()).flatten(),
            policy_evaluation: keep_policy.then(|| l.policy_evaluation.clone()).flatten(),
            combination_method: hybrid.then(|| l.combination_method.clone()).flatten(),
            output: l.output.clone(),
            ..Default::default()
        }
    });

    let quality = draft.decision_quality_indicators.as_ref().and_then(|q| {
        if q.decision_risk_level.is_none() && q.threshold_alerts.is_none() {
            return None;
        }
        Some(QualityIndicators {
            decision_risk_level: q.decision_risk_level.clone(),
            threshold_alerts: q.threshold_alerts.clone(),
            ..Default::default()
        })
    });

    DecisionEvent {
        schema_version: draft.schema_version.clone(),
        decision_context: context,
        decision_logic: logic,
        decision_boundary: separation_boundary(draft),
        decision_quality_indicators: quality,
        human_override_record: mandatory_override_record(draft),
        temporal_metadata: draft.temporal_metadata.clone(),
        ..Default::default()
    }
}

/// Estimated payload bands per tier, in canonical bytes (inclusive).
pub fn tier_band(tier: EvidenceTier) -> (usize, usize) {
    match tier {
        EvidenceTier::Lightweight => (200, 500),
        EvidenceTier::Sampled => (2_000, 5_000),
        EvidenceTier::Full => (5_000, 20_000),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandAssessment {
    Below,
    Within,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadAssessment {
    pub bytes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<EvidenceTier>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<BandAssessment>,
}

/// Canonical size of a draft and its position against the band for the
/// draft's declared tier.
pub fn estimate_payload_size(draft: &DecisionEvent) -> PayloadAssessment {
    let bytes = event::serialize_event(draft).len();
    let tier = draft.tier();
    let band = tier.map(|t| {
        let (lo, hi) = tier_band(t);
        if bytes < lo {
            BandAssessment::Below
        } else if bytes > hi {
            BandAssessment::Above
        } else {
            BandAssessment::Within
        }
    });
    PayloadAssessment { bytes, tier, band }
}
