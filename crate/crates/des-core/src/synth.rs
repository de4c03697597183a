//! Deterministic synthetic decision drafts for tests and benchmarks.
//!
//! Drafts are generated from a seeded ChaCha stream, validate cleanly at
//! their tier, and land inside the estimated payload band for that tier
//! (lightweight 200-500 B, sampled 2-5 KB, full 5-20 KB of canonical
//! bytes). Sizes are steered by growing the input array and padding the
//! free-text trigger, so repeated runs with one seed produce identical
//! drafts.

use crate::event::{
    serialize_event, BoundaryContract, CalendarDate, ConfidenceComponent, DataQuality,
    DecisionBoundary, DecisionContext, DecisionEvent, DecisionLogic, DownstreamRef, Environment,
    EventTime, HumanOverrideRecord, InputRecord, LowerHex, ModelInference, OverrideActor,
    PolicyEvaluation, QualityIndicators, RulePathEntry, Score, TemporalMetadata, ThresholdAlert,
    UpstreamRef, UuidString, SCHEMA_VERSION,
};
use crate::tokens::EvidenceTier;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const DECISION_TYPES: [&str; 5] = [
    "risk_scoring",
    "policy_enforcement",
    "fraud_detection",
    "transaction_screening",
    "access_review",
];
const DECISIONS: [&str; 4] = ["approve", "deny", "review", "escalate"];
const SYSTEMS: [&str; 4] = ["payments-gateway", "fraud-screening", "credit-engine", "access-control"];
const FEATURES: [&str; 8] = [
    "txn_amount_usd",
    "account_age_days",
    "velocity_1h",
    "geo_distance_km",
    "device_trust",
    "merchant_category",
    "chargeback_ratio",
    "kyc_level",
];

fn rng_for(tier: EvidenceTier, seed: u64) -> ChaCha8Rng {
    let salt = match tier {
        EvidenceTier::Lightweight => 1u64,
        EvidenceTier::Sampled => 2,
        EvidenceTier::Full => 3,
    };
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
}

fn uuid(rng: &mut ChaCha8Rng) -> UuidString {
    let mut bytes = [0u8; 16];
    rng.fill(&mut bytes);
    UuidString::from_uuid(uuid::Builder::from_random_bytes(bytes).into_uuid())
}

fn hex64(rng: &mut ChaCha8Rng) -> String {
    let mut bytes = [0u8; 32];
    rng.fill(&mut bytes);
    hex::encode(bytes)
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

// Never a whole number, so the double survives canonical form with its
// representation class intact and struct comparisons stay exact.
fn score(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.gen_range(1..=99u8)) / 100.0
}

fn timestamp(base_ms: i64, clock_ms: &mut i64, rng: &mut ChaCha8Rng) -> EventTime {
    *clock_ms += 737 + i64::from(rng.gen_range(0..500u32));
    EventTime::from_timestamp_millis(base_ms + *clock_ms).expect("in-range synthetic clock")
}

fn input_record(rng: &mut ChaCha8Rng, index: usize) -> InputRecord {
    let feature = pick(rng, &FEATURES);
    let value = match rng.gen_range(0..4u8) {
        0 => json!(score(rng)),
        1 => json!(rng.gen_range(0..100_000u32)),
        2 => Value::String(hex64(rng)), // privacy-hashed input
        _ => json!({"bucket": pick(rng, &["low", "mid", "high"]), "raw": rng.gen_range(0..1_000u32)}),
    };
    InputRecord {
        input_id: format!("{feature}_{index:02}"),
        input_type: pick(rng, &["feature", "model_output", "external_data"]).to_string(),
        input_value: Some(value),
        input_source: Some(format!("{}-store", pick(rng, &["feature", "profile", "ledger"]))),
        input_version: Some(format!("{}.{}.{}", rng.gen_range(1..4u8), rng.gen_range(0..10u8), rng.gen_range(0..10u8))),
        extensions: Default::default(),
    }
}

fn model_inference(rng: &mut ChaCha8Rng) -> ModelInference {
    ModelInference {
        model_id: Some(format!("risk-model-{}", rng.gen_range(1..9u8))),
        model_version: Some(format!("20{}.{}", rng.gen_range(24..27u8), rng.gen_range(1..13u8))),
        feature_vector_hash: Some(LowerHex::parse(&hex64(rng)).expect("hex")),
        prediction: Some(json!({"class": pick(rng, &DECISIONS)})),
        confidence: Some(Score::new(score(rng)).expect("bounded")),
        extensions: Default::default(),
    }
}

fn rule_path(rng: &mut ChaCha8Rng, len: usize) -> Vec<RulePathEntry> {
    (0..len)
        .map(|i| RulePathEntry {
            rule_id: format!("R-{:03}", rng.gen_range(1..400u16)),
            rule_version: format!("{}.{}", rng.gen_range(1..5u8), rng.gen_range(0..20u8)),
            rule_result: if i + 1 == len { "match".into() } else { pick(rng, &["no_match", "match"]).into() },
            extensions: Default::default(),
        })
        .collect()
}

fn policy_evaluation(rng: &mut ChaCha8Rng) -> PolicyEvaluation {
    PolicyEvaluation {
        policy_id: Some(format!("policies/{}/allow", pick(rng, &["payments", "kyc", "exposure"]))),
        policy_version: Some(format!("rev-{}", rng.gen_range(100..999u16))),
        policy_engine: Some("OPA".to_string()),
        evaluation_result: Some(json!(rng.gen_bool(0.8))),
        extensions: Default::default(),
    }
}

fn environment(rng: &mut ChaCha8Rng) -> Environment {
    Environment {
        system_id: pick(rng, &SYSTEMS).to_string(),
        system_version: Some(format!("{}.{}.{}", rng.gen_range(1..5u8), rng.gen_range(0..20u8), rng.gen_range(0..10u8))),
        configuration_hash: Some(LowerHex::parse(&hex64(rng)).expect("hex")),
        deployment_id: Some(format!("deploy-{}", rng.gen_range(1000..9999u16))),
        extensions: Default::default(),
    }
}

/// Grow the trigger text until the draft's canonical size reaches `target`.
fn pad_to(event: &mut DecisionEvent, target: usize) {
    loop {
        let size = serialize_event(event).len();
        if size >= target {
            return;
        }
        let deficit = target - size;
        let context = event.decision_context.get_or_insert_with(Default::default);
        match context.trigger.as_mut() {
            Some(t) => t.push_str(&"#".repeat(deficit)),
            None => context.trigger = Some("#".repeat(deficit.saturating_sub(13).max(1))),
        }
    }
}

fn base_draft(
    rng: &mut ChaCha8Rng,
    tier: EvidenceTier,
    base_ms: i64,
    clock_ms: &mut i64,
    logic_type: &str,
) -> DecisionEvent {
    let decision = pick(rng, &DECISIONS);
    DecisionEvent {
        schema_version: Some(SCHEMA_VERSION.to_string()),
        decision_context: Some(DecisionContext {
            decision_id: Some(uuid(rng)),
            decision_type: Some(pick(rng, &DECISION_TYPES).to_string()),
            ..Default::default()
        }),
        decision_logic: Some(DecisionLogic {
            logic_type: Some(logic_type.to_string()),
            output: Some(json!({"decision": decision, "score": score(rng)})),
            ..Default::default()
        }),
        human_override_record: Some(HumanOverrideRecord {
            override_occurred: Some(false),
            ..Default::default()
        }),
        temporal_metadata: Some(TemporalMetadata {
            event_timestamp: Some(timestamp(base_ms, clock_ms, rng)),
            processing_duration_ms: Some(u64::from(rng.gen_range(1..80u8))),
            evidence_tier: Some(tier.as_str().to_string()),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn attach_logic_subobjects(event: &mut DecisionEvent, rng: &mut ChaCha8Rng, logic_type: &str, deep: bool) {
    let logic = event.decision_logic.as_mut().expect("base draft has logic");
    match logic_type {
        "ml_inference" => logic.model_inference = Some(model_inference(rng)),
        "rule_based" => {
            let len = rng.gen_range(if deep { 4..9 } else { 2..5 });
            logic.rule_path = Some(rule_path(rng, len));
        }
        "policy_evaluation" => logic.policy_evaluation = Some(policy_evaluation(rng)),
        "hybrid" => {
            logic.model_inference = Some(model_inference(rng));
            let len = rng.gen_range(2..5);
            logic.rule_path = Some(rule_path(rng, len));
            logic.combination_method = Some(pick(rng, &["voting", "cascading", "weighted"]).to_string());
        }
        _ => {}
    }
}

fn quality(rng: &mut ChaCha8Rng, deep: bool) -> QualityIndicators {
    let alerts = if rng.gen_bool(0.3) {
        Some(
            (0..rng.gen_range(1..3u8))
                .map(|i| ThresholdAlert {
                    alert_id: Some(format!("alert_{}", i)),
                    threshold: Some(json!(0.8)),
                    observed: Some(json!(score(rng).max(0.8))),
                    extensions: Default::default(),
                })
                .collect(),
        )
    } else {
        None
    };
    QualityIndicators {
        confidence_score: Some(Score::new(score(rng)).expect("bounded")),
        confidence_components: deep.then(|| {
            (0..rng.gen_range(3..6u8))
                .map(|_| ConfidenceComponent {
                    component: Some(pick(rng, &["model", "rules", "policy", "data"]).to_string()),
                    score: Some(Score::new(score(rng)).expect("bounded")),
                    calibration_date: Some(
                        CalendarDate::parse(&format!("2026-0{}-1{}", rng.gen_range(1..10u8), rng.gen_range(0..10u8)))
                            .expect("date"),
                    ),
                    extensions: Default::default(),
                })
                .collect()
        }),
        data_quality: deep.then(|| DataQuality {
            completeness: Some(Score::new(score(rng)).expect("bounded")),
            freshness_seconds: Some(u64::from(rng.gen_range(1..3600u16))),
            known_issues: rng.gen_bool(0.4).then(|| vec!["stale_geo_feed".to_string()]),
            extensions: Default::default(),
        }),
        decision_risk_level: Some(pick(rng, &["low", "low", "medium", "high", "critical"]).to_string()),
        threshold_alerts: alerts,
        extensions: Default::default(),
    }
}

fn boundary(rng: &mut ChaCha8Rng, with_override_link: bool) -> DecisionBoundary {
    let contract = |rng: &mut ChaCha8Rng| BoundaryContract {
        protocol: Some(pick(rng, &["grpc", "https", "kafka"]).to_string()),
        schema_version: Some(format!("{}.{}", rng.gen_range(1..4u8), rng.gen_range(0..10u8))),
        sla: Some(json!({"p99_ms": rng.gen_range(50..400u16), "availability": "99.9"})),
        data_contract: Some(json!("avro:decision-v2")),
        failure_mode: Some(pick(rng, &["fail_closed", "fail_open", "degrade", "retry"]).to_string()),
        extensions: Default::default(),
    };
    let mut ups: Vec<UpstreamRef> = (0..rng.gen_range(1..4u8))
        .map(|_| UpstreamRef {
            decision_id: Some(uuid(rng)),
            system_id: Some(pick(rng, &SYSTEMS).to_string()),
            coupling_type: Some(pick(rng, &["input", "constraint", "context"]).to_string()),
            boundary_contract: rng.gen_bool(0.5).then(|| contract(rng)),
            extensions: Default::default(),
        })
        .collect();
    if with_override_link {
        ups.push(UpstreamRef {
            decision_id: Some(uuid(rng)),
            system_id: Some(pick(rng, &SYSTEMS).to_string()),
            coupling_type: Some("override".to_string()),
            boundary_contract: None,
            extensions: Default::default(),
        });
    }
    let downs: Vec<DownstreamRef> = (0..rng.gen_range(0..3u8))
        .map(|_| DownstreamRef {
            system_id: Some(pick(rng, &SYSTEMS).to_string()),
            contract_version: Some(format!("{}.0", rng.gen_range(1..6u8))),
            boundary_contract: rng.gen_bool(0.5).then(|| contract(rng)),
            extensions: Default::default(),
        })
        .collect();
    DecisionBoundary {
        upstream_decisions: Some(ups),
        downstream_consumers: Some(downs),
        extensions: Default::default(),
    }
}

fn actor(rng: &mut ChaCha8Rng) -> OverrideActor {
    OverrideActor {
        actor_id: Some(format!("op-{:04x}", rng.gen_range(0..0xffffu32))),
        actor_role: Some(pick(rng, &["operator", "supervisor", "auditor"]).to_string()),
        authorization_level: Some(pick(rng, &["l1", "l2", "l3"]).to_string()),
        extensions: Default::default(),
    }
}

/// Generate `n` drafts valid at `tier`, deterministic per seed, canonical
/// sizes inside the tier's payload band.
pub fn generate_synthetic(tier: EvidenceTier, seed: u64, n: usize) -> Vec<DecisionEvent> {
    let mut rng = rng_for(tier, seed);
    let base_ms = EventTime::parse("2026-03-01T00:00:00.000Z")
        .expect("fixed base")
        .datetime()
        .timestamp_millis();
    let mut clock_ms = 0i64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let event = match tier {
            EvidenceTier::Lightweight => {
                let logic_type = pick(&mut rng, &["ml_inference", "rule_based", "policy_evaluation"]);
                base_draft(&mut rng, tier, base_ms, &mut clock_ms, logic_type)
            }
            EvidenceTier::Sampled => {
                let logic_type = pick(&mut rng, &["ml_inference", "rule_based", "policy_evaluation", "hybrid"]);
                let mut e = base_draft(&mut rng, tier, base_ms, &mut clock_ms, logic_type);
                attach_logic_subobjects(&mut e, &mut rng, logic_type, false);
                {
                    let context = e.decision_context.as_mut().expect("base");
                    context.trigger = Some(pick(&mut rng, &["event", "schedule", "upstream_decision"]).to_string());
                    context.environment = Some(environment(&mut rng));
                    context.inputs = Some((0..6).map(|k| input_record(&mut rng, k)).collect());
                }
                e.decision_quality_indicators = Some(QualityIndicators {
                    decision_risk_level: Some(pick(&mut rng, &["low", "medium", "high"]).to_string()),
                    threshold_alerts: rng.gen_bool(0.3).then(|| {
                        vec![ThresholdAlert {
                            alert_id: Some("confidence_floor".into()),
                            threshold: Some(json!(0.8)),
                            observed: Some(json!(0.9)),
                            extensions: Default::default(),
                        }]
                    }),
                    ..Default::default()
                });
                let target = 2_500 + (rng.gen_range(0..1_800u16) as usize);
                let mut k = 6;
                while serialize_event(&e).len() + 170 < target {
                    let record = input_record(&mut rng, k);
                    e.decision_context
                        .as_mut()
                        .expect("base")
                        .inputs
                        .as_mut()
                        .expect("set above")
                        .push(record);
                    k += 1;
                }
                pad_to(&mut e, target);
                e
            }
            EvidenceTier::Full => {
                let roll = i % 13;
                let logic_type = if roll == 3 {
                    "human_decision"
                } else if roll == 7 {
                    pick(&mut rng, &["ml_inference", "rule_based"])
                } else {
                    pick(&mut rng, &["ml_inference", "rule_based", "policy_evaluation", "hybrid", "hybrid"])
                };
                let overridden = roll == 7;
                let mut e = base_draft(&mut rng, tier, base_ms, &mut clock_ms, logic_type);
                attach_logic_subobjects(&mut e, &mut rng, logic_type, true);
                {
                    let context = e.decision_context.as_mut().expect("base");
                    context.trigger = Some(pick(&mut rng, &["event", "schedule", "human_request", "upstream_decision"]).to_string());
                    context.environment = Some(environment(&mut rng));
                    context.inputs = Some((0..10).map(|k| input_record(&mut rng, k)).collect());
                }
                {
                    let logic = e.decision_logic.as_mut().expect("base");
                    logic.output_alternatives = Some(
                        (0..rng.gen_range(2..4u8))
                            .map(|_| json!({"decision": pick(&mut rng, &DECISIONS), "score": score(&mut rng)}))
                            .collect(),
                    );
                }
                e.decision_quality_indicators = Some(quality(&mut rng, true));
                e.decision_boundary = Some(boundary(&mut rng, false));
                e.temporal_metadata.as_mut().expect("base").retention_policy =
                    Some(crate::event::RetentionPolicy {
                        minimum_retention: Some(pick(&mut rng, &["P6M", "P1Y", "P2Y"]).to_string()),
                        classification: Some(pick(&mut rng, &["internal", "regulated"]).to_string()),
                        extensions: Default::default(),
                    });
                {
                    let record = e.human_override_record.as_mut().expect("base");
                    if logic_type == "human_decision" {
                        record.override_actor = Some(actor(&mut rng));
                        record.override_rationale = Some(json!("manual adjudication per queue policy"));
                    }
                    if overridden {
                        let ts = timestamp(base_ms, &mut clock_ms, &mut rng);
                        let original = json!({"decision": "approve", "score": 0.55});
                        let replacement = e.decision_logic.as_ref().expect("base").output.clone();
                        record.override_occurred = Some(true);
                        record.override_type = Some(pick(&mut rng, &["rejection", "modification", "escalation"]).to_string());
                        record.override_actor = Some(actor(&mut rng));
                        record.override_rationale = Some(json!("risk appetite exceeded for segment"));
                        record.original_output = Some(original);
                        record.overridden_output = replacement;
                        record.override_timestamp = Some(ts);
                        record.time_to_override_ms = Some(u64::from(rng.gen_range(800..90_000u32)));
                    }
                }
                let target = 6_500 + (rng.gen_range(0..7_500u16) as usize);
                let mut k = 10;
                while serialize_event(&e).len() + 170 < target {
                    let record = input_record(&mut rng, k);
                    e.decision_context
                        .as_mut()
                        .expect("base")
                        .inputs
                        .as_mut()
                        .expect("set above")
                        .push(record);
                    k += 1;
                }
                pad_to(&mut e, target);
                e
            }
        };
        debug_assert!(
            crate::validator::validate_draft(&event).valid,
            "synthetic draft must validate: {:?}",
            crate::validator::validate_draft(&event).violations
        );
        out.push(event);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiering::{estimate_payload_size, BandAssessment};
    use crate::validator;

    #[test]
    fn deterministic_per_seed() {
        for tier in EvidenceTier::ALL {
            let a = generate_synthetic(tier, 7, 24);
            let b = generate_synthetic(tier, 7, 24);
            assert_eq!(a, b);
            let c = generate_synthetic(tier, 8, 24);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn drafts_validate_and_sit_inside_their_band() {
        for tier in EvidenceTier::ALL {
            for event in generate_synthetic(tier, 11, 120) {
                let report = validator::validate_draft(&event);
                assert!(report.valid, "{tier}: {:?}", report.violations);
                let assessment = estimate_payload_size(&event);
                assert_eq!(
                    assessment.band,
                    Some(BandAssessment::Within),
                    "{tier}: {} bytes",
                    assessment.bytes
                );
            }
        }
    }

    #[test]
    fn full_drafts_cover_all_field_groups() {
        let drafts = generate_synthetic(EvidenceTier::Full, 3, 26);
        assert!(drafts.iter().all(|d| d.decision_boundary.is_some()));
        assert!(drafts.iter().all(|d| d.decision_quality_indicators.is_some()));
        assert!(drafts.iter().any(|d| d.logic_type() == Some("human_decision")));
        assert!(drafts.iter().any(|d| d.override_occurred() == Some(true)));
    }
}
