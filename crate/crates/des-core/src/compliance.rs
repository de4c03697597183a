//! Regulatory compliance reporting over a store.
//!
//! Profiles are data, not code: the built-ins (eu-ai-act, gdpr-logic,
//! nist-au) ship as a bundled JSON document and custom profiles load from a
//! file, so the regulation-to-tier mapping is editable without rebuilds.
//! The report restates that mapping against what a store actually holds; it
//! is not legal advice.

use crate::store::{EventStore, StoreError};
use crate::tokens::EvidenceTier;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const BUILTIN_PROFILES_JSON: &str = include_str!("../assets/profiles.json");

/// Conservative day-count for an ISO 8601 duration (years 365, months 30,
/// weeks 7). Good enough to compare retention floors like P6M.
pub fn iso8601_duration_days(s: &str) -> Option<f64> {
    let rest = s.strip_prefix('P')?;
    let (date_part, time_part) = match rest.split_once('T') {
        Some((d, t)) => (d, Some(t)),
        None => (rest, None),
    };
    let mut days = 0.0f64;
    let mut seen = false;

    let mut num = String::new();
    for c in date_part.chars() {
        if c.is_ascii_digit() || c == '.' {
            num.push(c);
        } else {
            let value: f64 = num.parse().ok()?;
            num.clear();
            seen = true;
            days += match c {
                'Y' => value * 365.0,
                'M' => value * 30.0,
                'W' => value * 7.0,
                'D' => value,
                _ => return None,
            };
        }
    }
    if !num.is_empty() {
        return None;
    }
    if let Some(time_part) = time_part {
        for c in time_part.chars() {
            if c.is_ascii_digit() || c == '.' {
                num.push(c);
            } else {
                let value: f64 = num.parse().ok()?;
                num.clear();
                seen = true;
                days += match c {
                    'H' => value / 24.0,
                    'M' => value / 1440.0,
                    'S' => value / 86_400.0,
                    _ => return None,
                };
            }
        }
        if !num.is_empty() {
            return None;
        }
    }
    seen.then_some(days)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier2Requirement {
    /// Tier has no bearing on this profile.
    None,
    /// Streams without sampled/full coverage get a warning.
    Warn,
    /// Streams without sampled/full coverage are insufficient.
    Require,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplianceProfile {
    pub profile_id: String,
    pub title: String,
    pub require_hash_chain: bool,
    pub required_retention: Option<String>,
    pub tier2_requirement: Tier2Requirement,
    /// When set, per-event signatures upgrade non-repudiation from
    /// ordering-only to identity-bound.
    pub signature_upgrade: bool,
    pub articles: Vec<String>,
}

pub fn builtin_profiles() -> Vec<ComplianceProfile> {
    serde_json::from_str(BUILTIN_PROFILES_JSON).expect("bundled profiles parse")
}

pub fn load_profiles(path: &std::path::Path) -> Result<Vec<ComplianceProfile>, std::io::Error> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

pub fn find_profile<'a>(profiles: &'a [ComplianceProfile], id: &str) -> Option<&'a ComplianceProfile> {
    profiles.iter().find(|p| p.profile_id == id)
}

/// Satisfied > Partial > Insufficient; a report's overall verdict is the
/// worst across streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplianceVerdict {
    Insufficient,
    Partial,
    Satisfied,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub lightweight: u64,
    pub sampled: u64,
    pub full: u64,
    pub other: u64,
}

impl TierCounts {
    pub fn total(&self) -> u64 {
        self.lightweight + self.sampled + self.full + self.other
    }

    pub fn tier2_plus(&self) -> u64 {
        self.sampled + self.full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionCheck {
    pub required: Option<String>,
    pub events_with_policy: u64,
    pub events_meeting_requirement: u64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamCompliance {
    pub system_id: String,
    pub events: u64,
    pub tier_counts: TierCounts,
    pub chain_clean: bool,
    pub chain_findings: usize,
    pub checkpoint_findings: usize,
    pub retention: RetentionCheck,
    pub signed_events: u64,
    /// Inputs whose value is a 64-char hex digest: the privacy-hashing
    /// usage statistic reported under data-minimization rows.
    pub hashed_value_inputs: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_repudiation: Option<String>,
    pub verdict: ComplianceVerdict,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub profile_id: String,
    pub profile_title: String,
    pub generated_at: String,
    pub articles: Vec<String>,
    pub streams: Vec<StreamCompliance>,
    pub overall: ComplianceVerdict,
}

fn looks_like_digest(v: &Value) -> bool {
    matches!(v, Value::String(s)
        if s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)))
}

/// Evaluate one profile against every stream in the store. Read-only.
pub fn compliance_report(
    store: &EventStore,
    profile: &ComplianceProfile,
) -> Result<ComplianceReport, StoreError> {
    let required_days = profile
        .required_retention
        .as_deref()
        .and_then(iso8601_duration_days);

    let mut streams = Vec::new();
    for system_id in store.streams() {
        let mut tier_counts = TierCounts::default();
        let mut events = 0u64;
        let mut signed = 0u64;
        let mut hashed_inputs = 0u64;
        let mut with_policy = 0u64;
        let mut meeting = 0u64;

        for result in store.scan_stream(&system_id, 1) {
            let event = result?;
            events += 1;
            match event.tier() {
                Some(EvidenceTier::Lightweight) => tier_counts.lightweight += 1,
                Some(EvidenceTier::Sampled) => tier_counts.sampled += 1,
                Some(EvidenceTier::Full) => tier_counts.full += 1,
                None => tier_counts.other += 1,
            }
            let temporal = event.temporal_metadata.as_ref();
            if temporal
                .and_then(|t| t.digital_signature.as_ref())
                .and_then(|s| s.signature_value.as_ref())
                .is_some()
            {
                signed += 1;
            }
            if let Some(retention) = temporal
                .and_then(|t| t.retention_policy.as_ref())
                .and_then(|r| r.minimum_retention.as_deref())
            {
                with_policy += 1;
                if let (Some(req), Some(have)) = (required_days, iso8601_duration_days(retention)) {
                    if have >= req {
                        meeting += 1;
                    }
                } else if required_days.is_none() {
                    meeting += 1;
                }
            }
            if let Some(inputs) = event.decision_context.as_ref().and_then(|c| c.inputs.as_ref()) {
                hashed_inputs += inputs
                    .iter()
                    .filter(|i| i.input_value.as_ref().map(looks_like_digest).unwrap_or(false))
                    .count() as u64;
            }
        }

        let chain_report = store.verify_stream(&system_id)?;
        let checkpoint_findings = store.verify_checkpoints(&system_id)?;

        let retention_satisfied = match required_days {
            None => true,
            Some(_) => events > 0 && with_policy == events && meeting == events,
        };

        let mut verdict = ComplianceVerdict::Satisfied;
        let mut warnings = Vec::new();
        let mut notes = Vec::new();

        if profile.require_hash_chain && !chain_report.is_clean() {
            verdict = ComplianceVerdict::Insufficient;
            warnings.push(format!(
                "tamper evidence broken: {} chain findings",
                chain_report.findings.len()
            ));
        }
        if !checkpoint_findings.is_empty() {
            warnings.push(format!("{} checkpoint findings", checkpoint_findings.len()));
        }

        if required_days.is_some() && !retention_satisfied {
            verdict = verdict.min(ComplianceVerdict::Partial);
            warnings.push(format!(
                "retention requirement {} not met on every event ({meeting}/{events} meet it, {with_policy}/{events} carry a policy)",
                profile.required_retention.as_deref().unwrap_or_default()
            ));
        }

        match profile.tier2_requirement {
            Tier2Requirement::None => {}
            Tier2Requirement::Warn => {
                if tier_counts.tier2_plus() == 0 {
                    warnings.push(
                        "risk-situation identification needs sampled or full evidence; stream has only lightweight records"
                            .to_string(),
                    );
                }
            }
            Tier2Requirement::Require => {
                if tier_counts.tier2_plus() == 0 {
                    verdict = ComplianceVerdict::Insufficient;
                    warnings.push(
                        "logic transparency requires causal-chain reconstruction, which needs sampled or full evidence"
                            .to_string(),
                    );
                } else {
                    notes.push(
                        "causal reconstruction holds for rule-based and hybrid events; pure ML events capture the authorization envelope only"
                            .to_string(),
                    );
                }
            }
        }

        let non_repudiation = if profile.signature_upgrade {
            if events > 0 && signed == events {
                notes.push("identity-bound non-repudiation: every event carries a digital signature".to_string());
                Some("identity-bound".to_string())
            } else {
                verdict = verdict.min(ComplianceVerdict::Partial);
                notes.push(
                    "ordering-only non-repudiation: identity binding needs per-event signatures or transport-layer mechanisms"
                        .to_string(),
                );
                Some("ordering-only".to_string())
            }
        } else {
            None
        };

        streams.push(StreamCompliance {
            system_id,
            events,
            tier_counts,
            chain_clean: chain_report.is_clean(),
            chain_findings: chain_report.findings.len(),
            checkpoint_findings: checkpoint_findings.len(),
            retention: RetentionCheck {
                required: profile.required_retention.clone(),
                events_with_policy: with_policy,
                events_meeting_requirement: meeting,
                satisfied: retention_satisfied,
            },
            signed_events: signed,
            hashed_value_inputs: hashed_inputs,
            non_repudiation,
            verdict,
            warnings,
            notes,
        });
    }

    let overall = streams
        .iter()
        .map(|s| s.verdict)
        .min()
        .unwrap_or(ComplianceVerdict::Satisfied);
    Ok(ComplianceReport {
        profile_id: profile.profile_id.clone(),
        profile_title: profile.title.clone(),
        generated_at: crate::event::EventTime::now().to_string(),
        articles: profile.articles.clone(),
        streams,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_parsing() {
        assert_eq!(iso8601_duration_days("P6M"), Some(180.0));
        assert_eq!(iso8601_duration_days("P1Y"), Some(365.0));
        assert_eq!(iso8601_duration_days("P2W"), Some(14.0));
        assert_eq!(iso8601_duration_days("P1DT12H"), Some(1.5));
        assert_eq!(iso8601_duration_days("PT30M"), Some(30.0 / 1440.0));
        assert!(iso8601_duration_days("P").is_none());
        assert!(iso8601_duration_days("6M").is_none());
        assert!(iso8601_duration_days("P6X").is_none());
        assert!(iso8601_duration_days("P6").is_none());
        assert!(iso8601_duration_days("P1Y6M").unwrap() > iso8601_duration_days("P6M").unwrap());
    }

    #[test]
    fn builtin_profiles_parse_and_cover_the_three_ids() {
        let profiles = builtin_profiles();
        for id in ["eu-ai-act", "gdpr-logic", "nist-au"] {
            assert!(find_profile(&profiles, id).is_some(), "{id}");
        }
        assert!(find_profile(&profiles, "unknown").is_none());
    }

    #[test]
    fn verdict_ordering() {
        assert!(ComplianceVerdict::Satisfied > ComplianceVerdict::Partial);
        assert!(ComplianceVerdict::Partial > ComplianceVerdict::Insufficient);
    }
}
