//! The write path: validate, tier, seal, append, checkpoint.
//!
//! A `Ledger` owns an event store plus the per-stream chain heads and
//! pending checkpoint batches. Appends to one stream are serialized behind
//! that stream's lock; distinct streams submit in parallel. Reopening a
//! ledger recovers chain heads from stored tails and resumes partially
//! filled checkpoint batches.

use crate::chain::{self, ChainError, ChainStreamState};
use crate::crypto::EventSigner;
use crate::event::DecisionEvent;
use crate::merkle::{self, Checkpoint, MerkleError, DEFAULT_CHECKPOINT_INTERVAL};
use crate::store::{EventStore, StoreConfig, StoreError};
use crate::tiering::{self, TierPolicy};
use serde::Serialize;
use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("draft names no stream: decision_context.environment.system_id is absent and no stream was supplied")]
    NoStream,
    #[error("decision {0} is already sealed in the store")]
    DuplicateDecision(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
}

#[derive(Clone)]
pub struct LedgerConfig {
    pub checkpoint_interval: u64,
    pub tier_policy: Option<TierPolicy>,
    pub signer: Option<EventSigner>,
    pub store: StoreConfig,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            checkpoint_interval: DEFAULT_CHECKPOINT_INTERVAL,
            tier_policy: None,
            signer: None,
            store: StoreConfig::default(),
        }
    }
}

/// What the caller gets back for a durably appended event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmitReceipt {
    pub decision_id: String,
    pub sequence_number: u64,
    pub current_hash: String,
    pub evidence_tier: String,
    pub stream: String,
}

struct StreamChain {
    state: ChainStreamState,
    pending_leaves: Vec<String>,
    pending_start: u64,
    last_checkpoint: Option<Checkpoint>,
}

pub struct Ledger {
    store: EventStore,
    cfg: LedgerConfig,
    chains: RwLock<HashMap<String, Arc<Mutex<StreamChain>>>>,
}

impl Ledger {
    pub fn open(root: impl AsRef<Path>, cfg: LedgerConfig) -> Result<Self, StoreError> {
        let store = EventStore::open(root.as_ref().to_path_buf(), cfg.store.clone())?;
        Ok(Ledger {
            store,
            cfg,
            chains: RwLock::new(HashMap::new()),
        })
    }

    pub fn store(&self) -> &EventStore {
        &self.store
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.cfg
    }

    fn chain(&self, stream: &str) -> Result<Arc<Mutex<StreamChain>>, StoreError> {
        if let Some(c) = self.chains.read().expect("ledger lock").get(stream) {
            return Ok(c.clone());
        }
        let mut map = self.chains.write().expect("ledger lock");
        if let Some(c) = map.get(stream) {
            return Ok(c.clone());
        }
        let state = self
            .store
            .tail_state(stream)
            .unwrap_or_else(|| ChainStreamState::new(stream));
        let checkpoints = self.store.checkpoints(stream);
        let last_checkpoint = checkpoints.last().cloned();
        let pending_start = last_checkpoint.as_ref().map(|c| c.end_sequence + 1).unwrap_or(1);
        let mut pending_leaves = Vec::new();
        if state.last_sequence >= pending_start {
            for result in self.store.scan_stream(stream, pending_start) {
                let event = result?;
                if let Some(hash) = event.current_hash() {
                    pending_leaves.push(hash.to_string());
                }
            }
        }
        let chain = Arc::new(Mutex::new(StreamChain {
            state,
            pending_leaves,
            pending_start,
            last_checkpoint,
        }));
        map.insert(stream.to_string(), chain.clone());
        Ok(chain)
    }

    /// Validate, tier (when a policy is configured), seal, durably append,
    /// and checkpoint on interval. Nothing is appended on any failure.
    pub fn submit(
        &self,
        draft: DecisionEvent,
        stream_override: Option<&str>,
    ) -> Result<SubmitReceipt, SubmitError> {
        let stream = stream_override
            .map(str::to_string)
            .or_else(|| draft.system_id().map(str::to_string))
            .ok_or(SubmitError::NoStream)?;

        let draft = match &self.cfg.tier_policy {
            Some(policy) => tiering::project_to_tier(&draft, tiering::select_tier(&draft, policy)),
            None => draft,
        };

        if let Some(id) = draft.decision_id() {
            if self.store.location(id).is_some() {
                return Err(SubmitError::DuplicateDecision(id.to_string()));
            }
        }

        let chain_arc = self.chain(&stream)?;
        let mut chain = chain_arc.lock().expect("stream chain lock");

        let (sealed, new_state) = chain::seal_and_append(&chain.state, draft, self.cfg.signer.as_ref())?;
        self.store.append_record(&stream, &sealed)?;
        chain.state = new_state;
        chain
            .pending_leaves
            .push(sealed.current_hash().expect("sealed").to_string());

        if chain.pending_leaves.len() as u64 >= self.cfg.checkpoint_interval {
            let checkpoint = merkle::build_checkpoint_from_leaves(
                &stream,
                chain.pending_start,
                &chain.pending_leaves,
                chain.last_checkpoint.as_ref(),
            )?;
            self.store.append_checkpoint(&checkpoint)?;
            chain.pending_start = checkpoint.end_sequence + 1;
            chain.last_checkpoint = Some(checkpoint);
            chain.pending_leaves.clear();
        }

        Ok(SubmitReceipt {
            decision_id: sealed.decision_id().unwrap_or_default().to_string(),
            sequence_number: sealed.sequence_number().expect("sealed"),
            current_hash: sealed.current_hash().expect("sealed").to_string(),
            evidence_tier: sealed.tier_token().unwrap_or_default().to_string(),
            stream,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::new_minimal_event;
    use crate::tokens::EvidenceTier;
    use serde_json::json;

    const TS: &str = "2026-03-14T09:26:53.589Z";

    fn draft(i: u128) -> DecisionEvent {
        new_minimal_event(
            &uuid::Uuid::from_u128(i + 1).hyphenated().to_string(),
            "risk_scoring",
            "ml_inference",
            json!({"score": 0.5}),
            false,
            TS,
            EvidenceTier::Lightweight,
        )
        .unwrap()
    }

    fn fast_cfg(interval: u64) -> LedgerConfig {
        LedgerConfig {
            checkpoint_interval: interval,
            store: StoreConfig {
                sync_writes: false,
                ..StoreConfig::default()
            },
            ..LedgerConfig::default()
        }
    }

    #[test]
    fn submit_assigns_sequence_and_checkpoints_on_interval() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = Ledger::open(dir.path(), fast_cfg(4)).unwrap();
        for i in 0..10 {
            let receipt = ledger.submit(draft(i), Some("payments")).unwrap();
            assert_eq!(receipt.sequence_number, i as u64 + 1);
        }
        let checkpoints = ledger.store().checkpoints("payments");
        assert_eq!(checkpoints.len(), 2, "per-4 checkpointing over 10 events");
        assert_eq!(checkpoints[0].start_sequence, 1);
        assert_eq!(checkpoints[0].end_sequence, 4);
        assert_eq!(checkpoints[1].start_sequence, 5);
        assert!(ledger.store().verify_stream("payments").unwrap().is_clean());
        assert!(ledger.store().verify_checkpoints("payments").unwrap().is_empty());
    }

    #[test]
    fn duplicate_decision_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = Ledger::open(dir.path(), fast_cfg(1024)).unwrap();
        let d = draft(7);
        ledger.submit(d.clone(), Some("payments")).unwrap();
        assert!(matches!(
            ledger.submit(d, Some("payments")),
            Err(SubmitError::DuplicateDecision(_))
        ));
    }

    #[test]
    fn reopen_resumes_pending_checkpoint_batches() {
        let dir = tempfile::tempdir().unwrap();
        {
            let ledger = Ledger::open(dir.path(), fast_cfg(4)).unwrap();
            for i in 0..6 {
                ledger.submit(draft(i), Some("payments")).unwrap();
            }
            assert_eq!(ledger.store().checkpoints("payments").len(), 1);
        }
        let ledger = Ledger::open(dir.path(), fast_cfg(4)).unwrap();
        for i in 6..8 {
            ledger.submit(draft(i), Some("payments")).unwrap();
        }
        let checkpoints = ledger.store().checkpoints("payments");
        assert_eq!(checkpoints.len(), 2);
        assert_eq!(checkpoints[1].start_sequence, 5);
        assert_eq!(checkpoints[1].end_sequence, 8);
        assert!(ledger.store().verify_checkpoints("payments").unwrap().is_empty());
    }

    #[test]
    fn policy_projects_drafts_before_sealing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = LedgerConfig {
            tier_policy: Some(TierPolicy::default()),
            ..fast_cfg(1024)
        };
        let ledger = Ledger::open(dir.path(), cfg).unwrap();
        let mut d = draft(3);
        d.temporal_metadata.as_mut().unwrap().evidence_tier = Some("full".into());
        // Default policy routes unalerted, riskless events to lightweight.
        let receipt = ledger.submit(d, Some("payments")).unwrap();
        assert_eq!(receipt.evidence_tier, "lightweight");
    }

    #[test]
    fn streams_are_independent() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = Ledger::open(dir.path(), fast_cfg(1024)).unwrap();
        ledger.submit(draft(1), Some("payments")).unwrap();
        ledger.submit(draft(2), Some("fraud")).unwrap();
        let receipt = ledger.submit(draft(3), Some("payments")).unwrap();
        assert_eq!(receipt.sequence_number, 2);
        assert_eq!(ledger.store().streams(), vec!["fraud".to_string(), "payments".to_string()]);
    }
}
