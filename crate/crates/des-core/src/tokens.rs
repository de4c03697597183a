//! Token vocabularies and the namespace-extension rule.
//!
//! Core enumerations are colon-free; domain extensions use a
//! `namespace:value` token, so the two sets can never collide. Closed
//! enumerations (risk levels, coupling types, ...) reject everything
//! outside their listed members.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Core `logic_type` members every implementation must support.
pub const CORE_LOGIC_TYPES: [&str; 5] = [
    "rule_based",
    "ml_inference",
    "hybrid",
    "policy_evaluation",
    "human_decision",
];

/// Core `input_type` members.
pub const CORE_INPUT_TYPES: [&str; 5] = [
    "feature",
    "model_output",
    "policy",
    "external_data",
    "human_input",
];

/// Built-in policy engine tokens (extension engines are namespaced).
pub const CORE_POLICY_ENGINES: [&str; 3] = ["OPA", "Cedar", "custom"];

pub const OVERRIDE_TYPES: [&str; 5] = [
    "approval",
    "rejection",
    "modification",
    "escalation",
    "deferral",
];

pub const RULE_RESULTS: [&str; 3] = ["match", "no_match", "error"];

pub const COUPLING_TYPES: [&str; 4] = ["input", "constraint", "override", "context"];

pub const FAILURE_MODES: [&str; 4] = ["fail_open", "fail_closed", "degrade", "retry"];

pub const COMBINATION_METHODS: [&str; 4] = ["voting", "cascading", "overriding", "weighted"];

pub const RISK_LEVELS: [&str; 4] = ["low", "medium", "high", "critical"];

/// Returns true when `token` matches the extension pattern
/// `^[a-z][a-z0-9_]*:[a-z][a-z0-9_.-]*$`.
pub fn is_namespaced(token: &str) -> bool {
    let Some((ns, rest)) = token.split_once(':') else {
        return false;
    };
    let mut ns_chars = ns.chars();
    match ns_chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    if !ns_chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
        return false;
    }
    let mut rest_chars = rest.chars();
    match rest_chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    rest_chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.' || c == '-')
}

/// The namespace prefix of an extension token, when present.
pub fn namespace_prefix(token: &str) -> Option<&str> {
    token.split_once(':').map(|(ns, _)| ns)
}

/// Evidence completeness level recorded in every event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceTier {
    Lightweight,
    Sampled,
    Full,
}

impl EvidenceTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvidenceTier::Lightweight => "lightweight",
            EvidenceTier::Sampled => "sampled",
            EvidenceTier::Full => "full",
        }
    }

    pub const ALL: [EvidenceTier; 3] = [
        EvidenceTier::Lightweight,
        EvidenceTier::Sampled,
        EvidenceTier::Full,
    ];
}

impl fmt::Display for EvidenceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvidenceTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lightweight" => Ok(EvidenceTier::Lightweight),
            "sampled" => Ok(EvidenceTier::Sampled),
            "full" => Ok(EvidenceTier::Full),
            other => Err(format!("unknown evidence tier {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn namespace_pattern() {
        assert!(is_namespaced("fintech:score_band"));
        assert!(is_namespaced("acme:custom"));
        assert!(is_namespaced("a:b.c-d_e"));
        assert!(is_namespaced("ns2:v2"));
        assert!(!is_namespaced("nocolon"));
        assert!(!is_namespaced(":leading"));
        assert!(!is_namespaced("trailing:"));
        assert!(!is_namespaced("Upper:case"));
        assert!(!is_namespaced("ns:Upper"));
        assert!(!is_namespaced("1ns:value"));
        assert!(!is_namespaced("ns:2value"));
        assert!(!is_namespaced("ns:va lue"));
        assert!(!is_namespaced("a-b:value"));
    }

    #[test]
    fn tier_ordering_reflects_completeness() {
        assert!(EvidenceTier::Lightweight < EvidenceTier::Sampled);
        assert!(EvidenceTier::Sampled < EvidenceTier::Full);
        assert_eq!("sampled".parse::<EvidenceTier>().unwrap(), EvidenceTier::Sampled);
    }
}
