//! Conditional validation rules for decision events.
//!
//! The engine is total: every applicable rule family runs and every finding
//! is reported, so audit fixtures can compare complete violation sets. Rule
//! IDs are stable across releases.
//!
//! Rule families
//! - R1   required fields (the ten root-level paths)
//! - R2a-d logic-type sub-object requirements, active at sampled/full only
//! - R2e  decision_risk_level required at sampled/full
//! - R3   human_decision attribution, all tiers
//! - R4   override triple required/forbidden by override_occurred, all tiers
//! - R4a  override of non-human logic carries actor and rationale, all tiers
//! - R5   human-over-human overrides need a linked upstream override ref
//! - R6   enumeration and namespace-extension checks
//!
//! At lightweight tier only the all-tier families run, so `rules_evaluated`
//! is constant regardless of payload size.

use crate::event::DecisionEvent;
use crate::tokens::{self, EvidenceTier};
use serde::{Deserialize, Serialize};

/// How events are validated: drafts have their sequence number and hash
/// chain assigned at sealing, so those two presence checks are deferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    Draft,
    Sealed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
    pub rules_evaluated: u32,
}

impl ValidationReport {
    pub fn has_rule(&self, rule_id: &str) -> bool {
        self.violations.iter().any(|v| v.rule_id == rule_id)
    }
}

/// Validate a sealed event at its declared tier.
pub fn validate(event: &DecisionEvent) -> ValidationReport {
    validate_with(event, ValidationMode::Sealed, None)
}

/// Validate a draft (pre-sealing) at its declared tier.
pub fn validate_draft(event: &DecisionEvent) -> ValidationReport {
    validate_with(event, ValidationMode::Draft, None)
}

/// Validate a batch; element-wise identical to single calls, order kept.
pub fn validate_batch<'a, I>(events: I) -> Vec<ValidationReport>
where
    I: IntoIterator<Item = &'a DecisionEvent>,
{
    events.into_iter().map(validate).collect()
}

pub fn validate_with(
    event: &DecisionEvent,
    mode: ValidationMode,
    tier_override: Option<EvidenceTier>,
) -> ValidationReport {
    let mut v: Vec<Violation> = Vec::new();
    let mut w: Vec<Violation> = Vec::new();

    let effective_tier = tier_override.or_else(|| event.tier());
    let tier2plus = matches!(effective_tier, Some(EvidenceTier::Sampled) | Some(EvidenceTier::Full));

    rule_r1(event, mode, &mut v);
    let mut rules_evaluated = 1u32;

    if tier2plus {
        rule_r2(event, &mut v);
        rules_evaluated += 5;
    }

    rule_r3(event, &mut v);
    rule_r4(event, &mut v, &mut w);
    rule_r4a(event, &mut v);
    rule_r5(event, &mut v);
    rule_r6(event, &mut v, &mut w);
    rules_evaluated += 5;

    ValidationReport {
        valid: v.is_empty(),
        violations: v,
        warnings: w,
        rules_evaluated,
    }
}

fn missing(v: &mut Vec<Violation>, rule_id: &str, path: &str, what: &str) {
    v.push(Violation {
        rule_id: rule_id.to_string(),
        path: path.to_string(),
        message: format!("{what} is required"),
    });
}

fn rule_r1(event: &DecisionEvent, mode: ValidationMode, v: &mut Vec<Violation>) {
    if event.schema_version.is_none() {
        missing(v, "R1", "schema_version", "schema_version");
    }
    if event.decision_id().is_none() {
        missing(v, "R1", "decision_context.decision_id", "decision_id");
    }
    if event.decision_type().is_none() {
        missing(v, "R1", "decision_context.decision_type", "decision_type");
    }
    if event.logic_type().is_none() {
        missing(v, "R1", "decision_logic.logic_type", "logic_type");
    }
    if event.output().is_none() {
        missing(v, "R1", "decision_logic.output", "output");
    }
    if event.override_occurred().is_none() {
        missing(v, "R1", "human_override_record.override_occurred", "override_occurred");
    }
    if event.event_timestamp().is_none() {
        missing(v, "R1", "temporal_metadata.event_timestamp", "event_timestamp");
    }
    if event.tier_token().is_none() {
        missing(v, "R1", "temporal_metadata.evidence_tier", "evidence_tier");
    }
    if mode == ValidationMode::Sealed {
        if event.sequence_number().is_none() {
            missing(v, "R1", "temporal_metadata.sequence_number", "sequence_number");
        }
        if event.temporal_metadata.as_ref().and_then(|t| t.hash_chain.as_ref()).is_none() {
            missing(v, "R1", "temporal_metadata.hash_chain", "hash_chain");
        }
    }
}

fn rule_r2(event: &DecisionEvent, v: &mut Vec<Violation>) {
    let logic = event.decision_logic.as_ref();
    let logic_type = event.logic_type();
    let has_model = logic.map(|l| l.model_inference.is_some()).unwrap_or(false);
    let has_rules = logic.map(|l| l.rule_path.is_some()).unwrap_or(false);
    let has_policy = logic.map(|l| l.policy_evaluation.is_some()).unwrap_or(false);

    match logic_type {
        Some("ml_inference") if !has_model => v.push(Violation {
            rule_id: "R2a".into(),
            path: "decision_logic.model_inference".into(),
            message: "model_inference is required for ml_inference at sampled/full tier".into(),
        }),
        Some("rule_based") if !has_rules => v.push(Violation {
            rule_id: "R2b".into(),
            path: "decision_logic.rule_path".into(),
            message: "rule_path is required for rule_based at sampled/full tier".into(),
        }),
        Some("policy_evaluation") if !has_policy => v.push(Violation {
            rule_id: "R2c".into(),
            path: "decision_logic.policy_evaluation".into(),
            message: "policy_evaluation is required for policy_evaluation at sampled/full tier".into(),
        }),
        Some("hybrid") => {
            let present = u8::from(has_model) + u8::from(has_rules) + u8::from(has_policy);
            if present < 2 {
                v.push(Violation {
                    rule_id: "R2d".into(),
                    path: "decision_logic".into(),
                    message: format!(
                        "hybrid requires at least two of model_inference, rule_path, policy_evaluation ({present} present)"
                    ),
                });
            }
            if logic.map(|l| l.combination_method.is_none()).unwrap_or(true) {
                v.push(Violation {
                    rule_id: "R2d".into(),
                    path: "decision_logic.combination_method".into(),
                    message: "hybrid requires combination_method at sampled/full tier".into(),
                });
            }
        }
        _ => {}
    }

    let has_risk = event
        .decision_quality_indicators
        .as_ref()
        .map(|q| q.decision_risk_level.is_some())
        .unwrap_or(false);
    if !has_risk {
        v.push(Violation {
            rule_id: "R2e".into(),
            path: "decision_quality_indicators.decision_risk_level".into(),
            message: "decision_risk_level is required at sampled/full tier".into(),
        });
    }
}

fn rule_r3(event: &DecisionEvent, v: &mut Vec<Violation>) {
    if event.logic_type() != Some("human_decision") {
        return;
    }
    let record = event.human_override_record.as_ref();
    if record.map(|r| r.override_actor.is_none()).unwrap_or(true) {
        v.push(Violation {
            rule_id: "R3".into(),
            path: "human_override_record.override_actor".into(),
            message: "override_actor is mandatory for human_decision at all tiers".into(),
        });
    }
    if record.map(|r| r.override_rationale.is_none()).unwrap_or(true) {
        v.push(Violation {
            rule_id: "R3".into(),
            path: "human_override_record.override_rationale".into(),
            message: "override_rationale is mandatory for human_decision at all tiers".into(),
        });
    }
}

fn rule_r4(event: &DecisionEvent, v: &mut Vec<Violation>, w: &mut Vec<Violation>) {
    let Some(record) = event.human_override_record.as_ref() else {
        return;
    };
    match record.override_occurred {
        Some(true) => {
            for (present, path) in [
                (record.original_output.is_some(), "human_override_record.original_output"),
                (record.overridden_output.is_some(), "human_override_record.overridden_output"),
                (record.override_timestamp.is_some(), "human_override_record.override_timestamp"),
            ] {
                if !present {
                    v.push(Violation {
                        rule_id: "R4".into(),
                        path: path.into(),
                        message: "required when override_occurred is true".into(),
                    });
                }
            }
            // The final output should match what the human decided; a
            // mismatch is surfaced as a warning, not a violation.
            if let (Some(out), Some(over)) = (event.output(), record.overridden_output.as_ref()) {
                if out != over {
                    w.push(Violation {
                        rule_id: "R4".into(),
                        path: "decision_logic.output".into(),
                        message: "output does not match human_override_record.overridden_output".into(),
                    });
                }
            }
        }
        Some(false) => {
            for (present, path) in [
                (record.original_output.is_some(), "human_override_record.original_output"),
                (record.overridden_output.is_some(), "human_override_record.overridden_output"),
                (record.override_timestamp.is_some(), "human_override_record.override_timestamp"),
            ] {
                if present {
                    v.push(Violation {
                        rule_id: "R4".into(),
                        path: path.into(),
                        message: "must be absent when override_occurred is false".into(),
                    });
                }
            }
        }
        None => {}
    }
}

fn rule_r4a(event: &DecisionEvent, v: &mut Vec<Violation>) {
    if event.override_occurred() != Some(true) || event.logic_type() == Some("human_decision") {
        return;
    }
    let record = event.human_override_record.as_ref();
    if record.map(|r| r.override_actor.is_none()).unwrap_or(true) {
        v.push(Violation {
            rule_id: "R4a".into(),
            path: "human_override_record.override_actor".into(),
            message: "overrides of automated decisions require override_actor".into(),
        });
    }
    if record.map(|r| r.override_rationale.is_none()).unwrap_or(true) {
        v.push(Violation {
            rule_id: "R4a".into(),
            path: "human_override_record.override_rationale".into(),
            message: "overrides of automated decisions require override_rationale".into(),
        });
    }
}

fn rule_r5(event: &DecisionEvent, v: &mut Vec<Violation>) {
    if event.logic_type() != Some("human_decision") || event.override_occurred() != Some(true) {
        return;
    }
    let linked = event
        .decision_boundary
        .as_ref()
        .and_then(|b| b.upstream_decisions.as_ref())
        .map(|ups| ups.iter().any(|u| u.coupling_type.as_deref() == Some("override")))
        .unwrap_or(false);
    if !linked {
        v.push(Violation {
            rule_id: "R5".into(),
            path: "decision_boundary.upstream_decisions".into(),
            message: "a human override of a human decision must be a separate event linked upstream with coupling_type=override"
                .into(),
        });
    }
}

fn check_closed(
    v: &mut Vec<Violation>,
    token: Option<&str>,
    allowed: &[&str],
    path: String,
    field: &str,
) {
    if let Some(t) = token {
        if !allowed.contains(&t) {
            v.push(Violation {
                rule_id: "R6".into(),
                path,
                message: format!("{field} {t:?} is not one of {allowed:?}"),
            });
        }
    }
}

fn check_extensible(
    v: &mut Vec<Violation>,
    token: Option<&str>,
    core: &[&str],
    path: String,
    field: &str,
) {
    let Some(t) = token else { return };
    if core.contains(&t) {
        return;
    }
    if !tokens::is_namespaced(t) {
        v.push(Violation {
            rule_id: "R6".into(),
            path,
            message: format!("{field} {t:?} is neither a core member nor a namespaced extension"),
        });
        return;
    }
    if let Some(prefix) = tokens::namespace_prefix(t) {
        if core.contains(&prefix) {
            v.push(Violation {
                rule_id: "R6".into(),
                path,
                message: format!("{field} namespace prefix {prefix:?} must not be a core enumeration member"),
            });
        }
    }
}

fn rule_r6(event: &DecisionEvent, v: &mut Vec<Violation>, w: &mut Vec<Violation>) {
    check_extensible(
        v,
        event.logic_type(),
        &tokens::CORE_LOGIC_TYPES,
        "decision_logic.logic_type".into(),
        "logic_type",
    );

    // decision_type is open-ended; only colon-bearing values must match the
    // namespace pattern.
    if let Some(dt) = event.decision_type() {
        if dt.contains(':') && !tokens::is_namespaced(dt) {
            v.push(Violation {
                rule_id: "R6".into(),
                path: "decision_context.decision_type".into(),
                message: format!("decision_type {dt:?} does not match the namespace pattern"),
            });
        }
    }

    if let Some(inputs) = event.decision_context.as_ref().and_then(|c| c.inputs.as_ref()) {
        for (i, input) in inputs.iter().enumerate() {
            check_extensible(
                v,
                Some(input.input_type.as_str()),
                &tokens::CORE_INPUT_TYPES,
                format!("decision_context.inputs.{i}.input_type"),
                "input_type",
            );
        }
    }

    if let Some(logic) = event.decision_logic.as_ref() {
        check_closed(
            v,
            logic.combination_method.as_deref(),
            &tokens::COMBINATION_METHODS,
            "decision_logic.combination_method".into(),
            "combination_method",
        );
        if let Some(rules) = logic.rule_path.as_ref() {
            for (i, entry) in rules.iter().enumerate() {
                check_closed(
                    v,
                    Some(entry.rule_result.as_str()),
                    &tokens::RULE_RESULTS,
                    format!("decision_logic.rule_path.{i}.rule_result"),
                    "rule_result",
                );
            }
        }
        if let Some(policy) = logic.policy_evaluation.as_ref() {
            check_extensible(
                v,
                policy.policy_engine.as_deref(),
                &tokens::CORE_POLICY_ENGINES,
                "decision_logic.policy_evaluation.policy_engine".into(),
                "policy_engine",
            );
        }
    }

    if let Some(record) = event.human_override_record.as_ref() {
        check_closed(
            v,
            record.override_type.as_deref(),
            &tokens::OVERRIDE_TYPES,
            "human_override_record.override_type".into(),
            "override_type",
        );
    }

    if let Some(boundary) = event.decision_boundary.as_ref() {
        if let Some(ups) = boundary.upstream_decisions.as_ref() {
            for (i, up) in ups.iter().enumerate() {
                check_closed(
                    v,
                    up.coupling_type.as_deref(),
                    &tokens::COUPLING_TYPES,
                    format!("decision_boundary.upstream_decisions.{i}.coupling_type"),
                    "coupling_type",
                );
                if let Some(contract) = up.boundary_contract.as_ref() {
                    check_closed(
                        v,
                        contract.failure_mode.as_deref(),
                        &tokens::FAILURE_MODES,
                        format!("decision_boundary.upstream_decisions.{i}.boundary_contract.failure_mode"),
                        "failure_mode",
                    );
                }
            }
        }
        if let Some(downs) = boundary.downstream_consumers.as_ref() {
            for (i, down) in downs.iter().enumerate() {
                if let Some(contract) = down.boundary_contract.as_ref() {
                    check_closed(
                        v,
                        contract.failure_mode.as_deref(),
                        &tokens::FAILURE_MODES,
                        format!("decision_boundary.downstream_consumers.{i}.boundary_contract.failure_mode"),
                        "failure_mode",
                    );
                }
            }
        }
    }

    if let Some(quality) = event.decision_quality_indicators.as_ref() {
        check_closed(
            v,
            quality.decision_risk_level.as_deref(),
            &tokens::RISK_LEVELS,
            "decision_quality_indicators.decision_risk_level".into(),
            "decision_risk_level",
        );
    }

    if let Some(tier) = event.tier_token() {
        if tier.parse::<EvidenceTier>().is_err() {
            v.push(Violation {
                rule_id: "R6".into(),
                path: "temporal_metadata.evidence_tier".into(),
                message: format!("evidence_tier {tier:?} is not one of [lightweight, sampled, full]"),
            });
        }
    }

    // Unknown top-level keys should carry a namespace; surfaced as warnings
    // since domain extensions at nested levels are explicitly open.
    for key in event.extensions.keys() {
        if !tokens::is_namespaced(key) {
            w.push(Violation {
                rule_id: "R6".into(),
                path: key.clone(),
                message: format!("top-level extension key {key:?} is not namespaced"),
            });
        }
    }
}

/// Applicability of a rule family across evidence tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierApplicability {
    All,
    Tier2Plus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleInfo {
    pub rule_id: &'static str,
    pub tier_applicability: TierApplicability,
    pub description: &'static str,
    pub reference: &'static str,
}

/// One entry per implemented rule family; IDs are stable across releases.
pub fn rule_catalog() -> Vec<RuleInfo> {
    use TierApplicability::*;
    vec![
        RuleInfo { rule_id: "R1", tier_applicability: All, description: "the ten required root-level fields are present", reference: "required_fields" },
        RuleInfo { rule_id: "R2a", tier_applicability: Tier2Plus, description: "ml_inference requires the model_inference object", reference: "tier_conditional" },
        RuleInfo { rule_id: "R2b", tier_applicability: Tier2Plus, description: "rule_based requires the rule_path array", reference: "tier_conditional" },
        RuleInfo { rule_id: "R2c", tier_applicability: Tier2Plus, description: "policy_evaluation requires the policy_evaluation object", reference: "tier_conditional" },
        RuleInfo { rule_id: "R2d", tier_applicability: Tier2Plus, description: "hybrid requires two of three logic sub-objects plus combination_method", reference: "tier_conditional" },
        RuleInfo { rule_id: "R2e", tier_applicability: Tier2Plus, description: "decision_risk_level becomes required", reference: "tier_conditional" },
        RuleInfo { rule_id: "R3", tier_applicability: All, description: "human_decision carries override_actor and override_rationale", reference: "attribution" },
        RuleInfo { rule_id: "R4", tier_applicability: All, description: "override triple required when override_occurred, forbidden otherwise", reference: "override_triggered" },
        RuleInfo { rule_id: "R4a", tier_applicability: All, description: "overrides of automated decisions carry actor and rationale", reference: "override_triggered" },
        RuleInfo { rule_id: "R5", tier_applicability: All, description: "human-over-human overrides are separate events linked upstream with coupling_type=override", reference: "separation" },
        RuleInfo { rule_id: "R6", tier_applicability: All, description: "enumeration membership and namespace-extension syntax", reference: "enumeration" },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{new_minimal_event, DecisionEvent};
    use crate::tokens::EvidenceTier;
    use serde_json::json;

    const ID: &str = "7b1d2f7e-4a62-4b9b-9f6e-2f4e5d6a7b8c";
    const TS: &str = "2026-03-14T09:26:53.589Z";

    fn draft(logic: &str, tier: EvidenceTier) -> DecisionEvent {
        new_minimal_event(ID, "risk_scoring", logic, json!({"d": "approve"}), false, TS, tier).unwrap()
    }

    #[test]
    fn tier1_suspends_logic_subobject_requirements() {
        let e = draft("ml_inference", EvidenceTier::Lightweight);
        let report = validate_draft(&e);
        assert!(report.valid, "{:?}", report.violations);
        assert_eq!(report.rules_evaluated, 6);
    }

    #[test]
    fn tier2_requires_model_inference() {
        let e = draft("ml_inference", EvidenceTier::Sampled);
        let report = validate_draft(&e);
        assert!(!report.valid);
        assert!(report.has_rule("R2a"));
        assert!(report.has_rule("R2e"));
        assert_eq!(report.rules_evaluated, 11);
    }

    #[test]
    fn override_fields_forbidden_without_override() {
        let mut e = draft("ml_inference", EvidenceTier::Lightweight);
        e.human_override_record.as_mut().unwrap().original_output = Some(json!("x"));
        let report = validate_draft(&e);
        assert!(report.has_rule("R4"));
    }

    #[test]
    fn hybrid_needs_two_of_three() {
        let mut e = draft("hybrid", EvidenceTier::Full);
        e.decision_logic.as_mut().unwrap().rule_path = Some(vec![]);
        e.decision_quality_indicators = Some(crate::event::QualityIndicators {
            decision_risk_level: Some("high".into()),
            ..Default::default()
        });
        let report = validate_draft(&e);
        assert!(report.has_rule("R2d"));
        let count = report.violations.iter().filter(|x| x.rule_id == "R2d").count();
        assert_eq!(count, 2, "two-of-three and combination_method both flagged");
    }

    #[test]
    fn human_over_human_separation_and_exemption() {
        let mut e = draft("human_decision", EvidenceTier::Lightweight);
        let record = e.human_override_record.as_mut().unwrap();
        record.override_occurred = Some(true);
        record.override_actor = Some(crate::event::OverrideActor {
            actor_id: Some("op-9f2c".into()),
            actor_role: Some("supervisor".into()),
            ..Default::default()
        });
        record.override_rationale = Some(json!("risk appetite exceeded"));
        record.original_output = Some(json!("approve"));
        record.overridden_output = Some(json!("deny"));
        record.override_timestamp = Some(crate::event::EventTime::parse(TS).unwrap());
        e.decision_logic.as_mut().unwrap().output = Some(json!("deny"));
        let report = validate_draft(&e);
        assert!(report.has_rule("R5"), "combined form is rejected: {report:?}");

        // Linking the prior decision upstream with coupling_type=override
        // exempts the event from re-separation.
        e.decision_boundary = Some(crate::event::DecisionBoundary {
            upstream_decisions: Some(vec![crate::event::UpstreamRef {
                decision_id: Some(crate::event::UuidString::parse(ID).unwrap()),
                system_id: Some("adjudication".into()),
                coupling_type: Some("override".into()),
                ..Default::default()
            }]),
            ..Default::default()
        });
        let report = validate_draft(&e);
        assert!(report.valid, "{:?}", report.violations);
    }

    #[test]
    fn namespace_prefix_must_not_be_core_token() {
        let mut e = draft("ml_inference", EvidenceTier::Lightweight);
        e.decision_logic.as_mut().unwrap().logic_type = Some("rule_based:x".into());
        let report = validate_draft(&e);
        assert!(report.has_rule("R6"));
    }

    #[test]
    fn rules_evaluated_constant_at_lightweight() {
        let small = draft("ml_inference", EvidenceTier::Lightweight);
        let mut big = small.clone();
        big.decision_logic.as_mut().unwrap().output = Some(json!("x".repeat(5000)));
        assert_eq!(validate_draft(&small).rules_evaluated, validate_draft(&big).rules_evaluated);
    }

    #[test]
    fn output_mismatch_is_a_warning_not_violation() {
        let mut e = draft("ml_inference", EvidenceTier::Lightweight);
        let record = e.human_override_record.as_mut().unwrap();
        record.override_occurred = Some(true);
        record.override_actor = Some(Default::default());
        record.override_rationale = Some(json!("routine"));
        record.original_output = Some(json!("a"));
        record.overridden_output = Some(json!("b"));
        record.override_timestamp = Some(crate::event::EventTime::parse(TS).unwrap());
        // output still says "approve" object, mismatching overridden_output
        let report = validate_draft(&e);
        assert!(report.valid, "{:?}", report.violations);
        assert!(report.warnings.iter().any(|x| x.path == "decision_logic.output"));
    }

    #[test]
    fn catalog_is_stable() {
        let catalog = rule_catalog();
        assert_eq!(catalog.len(), 11);
        let all_tier = catalog.iter().filter(|r| r.tier_applicability == TierApplicability::All).count();
        assert_eq!(all_tier, 6);
        for family in ["R1", "R2a", "R2b", "R2c", "R2d", "R2e", "R3", "R4", "R4a", "R5", "R6"] {
            assert!(catalog.iter().any(|r| r.rule_id == family));
        }
    }

    #[test]
    fn batch_matches_elementwise() {
        let good = draft("ml_inference", EvidenceTier::Lightweight);
        let mut bad = good.clone();
        bad.schema_version = None;
        // Sealed-mode batch over drafts: both gain R1 findings for chain
        // fields, bad additionally for schema_version.
        let reports = validate_batch([&good, &bad]);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0], validate(&good));
        assert_eq!(reports[1], validate(&bad));
        assert!(reports[1].has_rule("R1"));
        assert!(validate_batch(std::iter::empty::<&DecisionEvent>()).is_empty());
    }
}
