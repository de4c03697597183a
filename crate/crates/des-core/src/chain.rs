//! Per-system hash-chain sealing and verification.
//!
//! One chain per `system_id`; exactly one writer per stream at a time.
//! The genesis `previous_hash` sentinel is 64 zero characters, an
//! unambiguous empty-stream marker.

use crate::crypto::{self, CryptoError, EventSigner, HASH_ALG_SHA256};
use crate::event::{DecisionEvent, HashChain, Hex64};
use crate::validator::{self, ValidationReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Genesis sentinel for `previous_hash` (and the first checkpoint link).
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// Head of one per-system chain stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStreamState {
    pub system_id: String,
    /// 0 when the stream is empty; sequence numbers start at 1.
    pub last_sequence: u64,
    pub last_hash: String,
}

impl ChainStreamState {
    pub fn new(system_id: impl Into<String>) -> Self {
        ChainStreamState {
            system_id: system_id.into(),
            last_sequence: 0,
            last_hash: GENESIS_HASH.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("draft rejected by validation ({} violations)", report.violations.len())]
    RejectedInvalid { report: Box<ValidationReport> },
    #[error("stream mismatch: state is {expected:?}, draft names {found:?}")]
    StreamMismatch { expected: String, found: String },
    #[error("draft is already sealed")]
    AlreadySealed,
    #[error("draft already carries {0}; it is assigned at sealing")]
    DraftAlreadyStamped(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Validate, stamp, optionally sign, and seal a draft onto a stream.
///
/// On any error the returned state is untouched (the input state is only
/// read). Signing happens before hashing, so the hash covers
/// `signature_value`.
pub fn seal_and_append(
    state: &ChainStreamState,
    mut draft: DecisionEvent,
    signer: Option<&EventSigner>,
) -> Result<(DecisionEvent, ChainStreamState), ChainError> {
    if draft.is_sealed() {
        return Err(ChainError::AlreadySealed);
    }
    if draft.sequence_number().is_some() {
        return Err(ChainError::DraftAlreadyStamped("sequence_number"));
    }
    if draft.previous_hash().is_some() {
        return Err(ChainError::DraftAlreadyStamped("hash_chain.previous_hash"));
    }
    if let Some(found) = draft.system_id() {
        if found != state.system_id {
            return Err(ChainError::StreamMismatch {
                expected: state.system_id.clone(),
                found: found.to_string(),
            });
        }
    }
    if let Some(alg) = draft
        .temporal_metadata
        .as_ref()
        .and_then(|t| t.hash_chain.as_ref())
        .and_then(|c| c.algorithm.as_deref())
    {
        if alg != HASH_ALG_SHA256 {
            return Err(CryptoError::UnsupportedAlgorithm(alg.to_string()).into());
        }
    }

    let report = validator::validate_draft(&draft);
    if !report.valid {
        return Err(ChainError::RejectedInvalid {
            report: Box::new(report),
        });
    }

    let sequence = state.last_sequence + 1;
    let previous = Hex64::parse(&state.last_hash).expect("state holds a 64-char hex hash");
    {
        let temporal = draft.temporal_metadata.get_or_insert_with(Default::default);
        temporal.sequence_number = Some(sequence);
        let chain = temporal.hash_chain.get_or_insert_with(HashChain::default);
        chain.previous_hash = Some(previous);
        chain.algorithm = Some(HASH_ALG_SHA256.to_string());
    }

    if let Some(signer) = signer {
        let signature = crypto::sign_event(&draft, signer)?;
        draft
            .temporal_metadata
            .as_mut()
            .expect("stamped above")
            .digital_signature = Some(signature);
    }

    let digest = crypto::compute_event_hash(&draft)?;
    draft
        .temporal_metadata
        .as_mut()
        .expect("stamped above")
        .hash_chain
        .as_mut()
        .expect("stamped above")
        .current_hash = Some(digest.hex.clone());

    let new_state = ChainStreamState {
        system_id: state.system_id.clone(),
        last_sequence: sequence,
        last_hash: digest.hex.as_str().to_string(),
    };
    Ok((draft, new_state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFindingKind {
    HashMismatch,
    LinkMismatch,
    SequenceGap,
    SequenceDuplicate,
    MissingSeal,
    GenesisMismatch,
    TimestampRegression,
    CorruptRecord,
    NonCanonicalRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFinding {
    /// Index within the verified sequence (not the sequence number).
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence_number: Option<u64>,
    pub kind: ChainFindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainVerificationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    pub events_checked: usize,
    pub findings: Vec<ChainFinding>,
    /// Timestamp regressions only; sequence numbers are the ordering
    /// authority and wall clocks skew.
    pub warnings: Vec<ChainFinding>,
}

impl ChainVerificationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Verify an ordered event sequence for one stream: recomputed hashes,
/// previous-hash links, sequence continuity, and timestamp monotonicity.
pub fn verify_chain(events: &[DecisionEvent]) -> ChainVerificationReport {
    let mut report = ChainVerificationReport {
        system_id: events.iter().find_map(|e| e.system_id().map(str::to_string)),
        events_checked: events.len(),
        ..Default::default()
    };

    let mut prev_seq: Option<u64> = None;
    let mut prev_hash: Option<String> = None;
    let mut prev_time = None;

    for (index, event) in events.iter().enumerate() {
        let seq = event.sequence_number();

        let sealed = event.current_hash().is_some() && event.previous_hash().is_some() && seq.is_some();
        if !sealed {
            report.findings.push(ChainFinding {
                index,
                sequence_number: seq,
                kind: ChainFindingKind::MissingSeal,
                detail: "record lacks sequence_number, previous_hash, or current_hash".into(),
            });
        } else {
            match crypto::compute_event_hash(event) {
                Ok(digest) => {
                    let stored = event.current_hash().expect("sealed");
                    if digest.hex.as_str() != stored {
                        report.findings.push(ChainFinding {
                            index,
                            sequence_number: seq,
                            kind: ChainFindingKind::HashMismatch,
                            detail: format!("stored current_hash {stored} != recomputed {}", digest.hex),
                        });
                    }
                }
                Err(e) => report.findings.push(ChainFinding {
                    index,
                    sequence_number: seq,
                    kind: ChainFindingKind::HashMismatch,
                    detail: format!("hash recomputation failed: {e}"),
                }),
            }
        }

        match (seq, prev_seq) {
            (Some(s), None) => {
                if s == 1 {
                    // A stream's first record links to the genesis sentinel.
                    if let Some(p) = event.previous_hash() {
                        if p != GENESIS_HASH {
                            report.findings.push(ChainFinding {
                                index,
                                sequence_number: seq,
                                kind: ChainFindingKind::GenesisMismatch,
                                detail: format!("first record previous_hash {p} is not the genesis sentinel"),
                            });
                        }
                    }
                }
            }
            (Some(s), Some(p)) => {
                if s == p {
                    report.findings.push(ChainFinding {
                        index,
                        sequence_number: seq,
                        kind: ChainFindingKind::SequenceDuplicate,
                        detail: format!("sequence {s} repeats"),
                    });
                } else if s != p + 1 {
                    report.findings.push(ChainFinding {
                        index,
                        sequence_number: seq,
                        kind: ChainFindingKind::SequenceGap,
                        detail: format!("sequence jumps from {p} to {s}"),
                    });
                }
            }
            (None, _) => {}
        }

        if let (Some(expected), Some(found)) = (prev_hash.as_deref(), event.previous_hash()) {
            if expected != found {
                report.findings.push(ChainFinding {
                    index,
                    sequence_number: seq,
                    kind: ChainFindingKind::LinkMismatch,
                    detail: format!("previous_hash {found} != predecessor current_hash {expected}"),
                });
            }
        }

        if let Some(t) = event.event_timestamp().copied() {
            if let Some(pt) = prev_time {
                if t < pt {
                    report.warnings.push(ChainFinding {
                        index,
                        sequence_number: seq,
                        kind: ChainFindingKind::TimestampRegression,
                        detail: format!("event_timestamp {t} precedes predecessor {pt}"),
                    });
                }
            }
            prev_time = Some(t);
        }

        if let Some(s) = seq {
            prev_seq = Some(s);
        }
        prev_hash = event.current_hash().map(str::to_string);
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::new_minimal_event;
    use crate::tokens::EvidenceTier;
    use serde_json::json;

    fn draft(i: u32) -> DecisionEvent {
        let id = uuid::Uuid::from_u128(0x1000 + i as u128);
        new_minimal_event(
            &id.hyphenated().to_string(),
            "risk_scoring",
            "ml_inference",
            json!({"score": 0.5 + f64::from(i % 10) / 100.0}),
            false,
            &format!("2026-03-14T09:26:{:02}.000Z", i % 60),
            EvidenceTier::Lightweight,
        )
        .unwrap()
    }

    fn build_chain(n: u32) -> Vec<DecisionEvent> {
        let mut state = ChainStreamState::new("payments");
        let mut out = Vec::new();
        for i in 0..n {
            let (sealed, next) = seal_and_append(&state, draft(i), None).unwrap();
            out.push(sealed);
            state = next;
        }
        out
    }

    #[test]
    fn genesis_and_linkage() {
        let chain = build_chain(3);
        assert_eq!(chain[0].sequence_number(), Some(1));
        assert_eq!(chain[0].previous_hash(), Some(GENESIS_HASH));
        assert_eq!(chain[1].previous_hash(), chain[0].current_hash());
        assert_eq!(chain[2].previous_hash(), chain[1].current_hash());
        assert!(verify_chain(&chain).is_clean());
    }

    #[test]
    fn invalid_draft_is_rejected_atomically() {
        let state = ChainStreamState::new("payments");
        let mut bad = draft(0);
        bad.schema_version = None;
        let before = state.clone();
        match seal_and_append(&state, bad, None) {
            Err(ChainError::RejectedInvalid { report }) => assert!(report.has_rule("R1")),
            other => panic!("expected RejectedInvalid, got {other:?}"),
        }
        assert_eq!(state, before);
    }

    #[test]
    fn stream_mismatch_rejected() {
        let state = ChainStreamState::new("payments");
        let mut d = draft(0);
        d.decision_context.as_mut().unwrap().environment = Some(crate::event::Environment {
            system_id: "fraud".into(),
            system_version: None,
            configuration_hash: None,
            deployment_id: None,
            extensions: Default::default(),
        });
        assert!(matches!(
            seal_and_append(&state, d, None),
            Err(ChainError::StreamMismatch { .. })
        ));
    }

    #[test]
    fn tampering_with_output_is_detected() {
        let mut chain = build_chain(50);
        chain[42].decision_logic.as_mut().unwrap().output = Some(json!({"score": 0.99}));
        let report = verify_chain(&chain);
        assert!(report
            .findings
            .iter()
            .any(|f| f.index == 42 && f.kind == ChainFindingKind::HashMismatch));

        // An attacker recomputing event 42's hash breaks the link at 43.
        let digest = crate::crypto::compute_event_hash(&chain[42]).unwrap();
        chain[42]
            .temporal_metadata
            .as_mut()
            .unwrap()
            .hash_chain
            .as_mut()
            .unwrap()
            .current_hash = Some(digest.hex);
        let report = verify_chain(&chain);
        assert!(report
            .findings
            .iter()
            .any(|f| f.index == 43 && f.kind == ChainFindingKind::LinkMismatch));
    }

    #[test]
    fn deletion_creates_a_gap() {
        let mut chain = build_chain(20);
        chain.remove(9);
        let report = verify_chain(&chain);
        assert!(report.findings.iter().any(|f| f.kind == ChainFindingKind::SequenceGap));
    }

    #[test]
    fn timestamp_regression_is_a_warning_only() {
        let mut state = ChainStreamState::new("payments");
        let mut events = Vec::new();
        for ts in ["2026-03-14T09:27:00.000Z", "2026-03-14T09:26:00.000Z"] {
            let d = new_minimal_event(
                &uuid::Uuid::from_u128(events.len() as u128 + 7).hyphenated().to_string(),
                "risk_scoring",
                "ml_inference",
                json!(1),
                false,
                ts,
                EvidenceTier::Lightweight,
            )
            .unwrap();
            let (sealed, next) = seal_and_append(&state, d, None).unwrap();
            events.push(sealed);
            state = next;
        }
        let report = verify_chain(&events);
        assert!(report.is_clean());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].kind, ChainFindingKind::TimestampRegression);
    }

    #[test]
    fn stamped_drafts_are_refused() {
        let state = ChainStreamState::new("payments");
        let (sealed, _) = seal_and_append(&state, draft(0), None).unwrap();
        assert!(matches!(
            seal_and_append(&state, sealed, None),
            Err(ChainError::AlreadySealed)
        ));
        let mut pre_stamped = draft(1);
        pre_stamped.temporal_metadata.as_mut().unwrap().sequence_number = Some(5);
        assert!(matches!(
            seal_and_append(&state, pre_stamped, None),
            Err(ChainError::DraftAlreadyStamped("sequence_number"))
        ));
    }
}
