//! Decision Event Schema toolkit.
//!
//! Governance-grade decision records: construct them, validate them against
//! the conditional rule set, canonicalize and seal them into per-system
//! hash chains, commit Merkle checkpoints, project them across evidence
//! tiers, enrich them after sealing, and persist everything in append-only
//! NDJSON segments.
//!
//! Typical write path: [`event::parse_event`] or a constructor, then
//! [`ledger::Ledger::submit`], which validates, applies the tier policy,
//! seals, appends durably, and checkpoints on interval.

pub mod canonical;
pub mod chain;
pub mod compliance;
pub mod crypto;
pub mod enrichment;
pub mod event;
pub mod ledger;
pub mod merkle;
pub mod opa;
pub mod store;
pub mod synth;
pub mod tiering;
pub mod tokens;
pub mod validator;

pub use chain::{ChainStreamState, ChainVerificationReport, GENESIS_HASH};
pub use crypto::{EventSigner, SealedDigest};
pub use event::{new_minimal_event, parse_event, serialize_event, DecisionEvent};
pub use ledger::{Ledger, LedgerConfig, SubmitReceipt};
pub use merkle::{Checkpoint, InclusionProof};
pub use store::{EventStore, StoreConfig};
pub use tiering::TierPolicy;
pub use tokens::EvidenceTier;
pub use validator::{validate, validate_draft, ValidationReport};
