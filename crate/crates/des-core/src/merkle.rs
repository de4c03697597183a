//! Incremental Merkle checkpoints over sealed event batches.
//!
//! Leaves are the `current_hash` values in sequence order; an internal node
//! is `sha256(left || right)` over the raw 32-byte child hashes. When a
//! level has an odd node it is promoted unpaired to the next level
//! (duplicated-last is NOT used), which avoids the duplicated-leaf
//! second-preimage ambiguity. External verifiers must build the same shape.
//!
//! With promotion, a promoted leaf's proof is shorter than `ceil(log2 n)`;
//! `ceil(log2 n)` is the maximum proof length, exact for every leaf when
//! `n` is a power of two.

use crate::canonical;
use crate::chain::GENESIS_HASH;
use crate::crypto::{sha256_hex, HASH_ALG_SHA256};
use crate::event::DecisionEvent;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default checkpointing cadence (events per checkpoint). Configurable;
/// larger intervals trade verification granularity for throughput.
pub const DEFAULT_CHECKPOINT_INTERVAL: u64 = 1024;

#[derive(Debug, Error)]
pub enum MerkleError {
    #[error("checkpoint batch is empty")]
    EmptyBatch,
    #[error("non-contiguous batch: expected sequence {expected}, found {found}")]
    BatchGap { expected: u64, found: u64 },
    #[error("batch contains an unsealed record at index {index}")]
    Unsealed { index: usize },
    #[error("leaf index {index} out of range for {leaves} leaves")]
    IndexOutOfRange { index: usize, leaves: usize },
    #[error("leaf is not a 64-char hex digest: {0}")]
    BadLeaf(String),
}

/// A Merkle commitment over a contiguous batch of sealed events.
/// Checkpoints themselves form a hash chain via `previous_checkpoint_hash`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub checkpoint_id: String,
    pub system_id: String,
    pub start_sequence: u64,
    pub end_sequence: u64,
    pub merkle_root: String,
    pub previous_checkpoint_hash: String,
    pub algorithm: String,
}

impl Checkpoint {
    pub fn leaf_count(&self) -> u64 {
        self.end_sequence - self.start_sequence + 1
    }
}

/// Hash of a checkpoint's canonical JSON form; links the checkpoint chain.
pub fn checkpoint_hash(checkpoint: &Checkpoint) -> String {
    let value = serde_json::to_value(checkpoint).expect("checkpoint serializes");
    let bytes = canonical::canonicalize(&value).expect("checkpoint canonicalizes");
    sha256_hex(&bytes)
}

fn decode_leaf(hex_str: &str) -> Result<[u8; 32], MerkleError> {
    let bytes = hex::decode(hex_str).map_err(|_| MerkleError::BadLeaf(hex_str.to_string()))?;
    bytes.try_into().map_err(|_| MerkleError::BadLeaf(hex_str.to_string()))
}

fn parent(left: &[u8; 32], right: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(left);
    h.update(right);
    h.finalize().into()
}

fn next_level(level: &[[u8; 32]]) -> Vec<[u8; 32]> {
    let mut out = Vec::with_capacity(level.len().div_ceil(2));
    let mut chunks = level.chunks_exact(2);
    for pair in chunks.by_ref() {
        out.push(parent(&pair[0], &pair[1]));
    }
    if let [odd] = chunks.remainder() {
        out.push(*odd); // promotion
    }
    out
}

/// Root over leaf digests given as 64-char hex strings.
pub fn merkle_root(leaves: &[String]) -> Result<String, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyBatch);
    }
    let mut level: Vec<[u8; 32]> = leaves
        .iter()
        .map(|l| decode_leaf(l))
        .collect::<Result<_, _>>()?;
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(hex::encode(level[0]))
}

/// Build a checkpoint over a contiguous, fully sealed batch.
pub fn build_checkpoint(
    system_id: &str,
    events: &[DecisionEvent],
    previous: Option<&Checkpoint>,
) -> Result<Checkpoint, MerkleError> {
    if events.is_empty() {
        return Err(MerkleError::EmptyBatch);
    }
    let mut leaves = Vec::with_capacity(events.len());
    let mut expected = None;
    for (index, event) in events.iter().enumerate() {
        let (Some(seq), Some(hash)) = (event.sequence_number(), event.current_hash()) else {
            return Err(MerkleError::Unsealed { index });
        };
        if let Some(exp) = expected {
            if seq != exp {
                return Err(MerkleError::BatchGap { expected: exp, found: seq });
            }
        }
        expected = Some(seq + 1);
        leaves.push(hash.to_string());
    }
    let start_sequence = events[0].sequence_number().expect("checked");
    build_checkpoint_from_leaves(system_id, start_sequence, &leaves, previous)
}

/// Checkpoint from already collected leaf digests covering sequences
/// `start_sequence ..= start_sequence + leaves.len() - 1`.
pub fn build_checkpoint_from_leaves(
    system_id: &str,
    start_sequence: u64,
    leaves: &[String],
    previous: Option<&Checkpoint>,
) -> Result<Checkpoint, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyBatch);
    }
    let end_sequence = start_sequence + leaves.len() as u64 - 1;
    let merkle_root = merkle_root(leaves)?;
    let previous_checkpoint_hash = previous.map(checkpoint_hash).unwrap_or_else(|| GENESIS_HASH.to_string());
    Ok(Checkpoint {
        checkpoint_id: format!("{system_id}:{start_sequence}-{end_sequence}"),
        system_id: system_id.to_string(),
        start_sequence,
        end_sequence,
        merkle_root,
        previous_checkpoint_hash,
        algorithm: HASH_ALG_SHA256.to_string(),
    })
}

/// Which side the sibling hash sits on, relative to the running node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub side: Side,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    /// 0-based position within the checkpoint batch.
    pub leaf_index: u64,
    pub leaf_hash: String,
    pub siblings: Vec<ProofStep>,
}

/// Proof that `leaves[leaf_index]` is committed by the root over `leaves`.
pub fn inclusion_proof(leaves: &[String], leaf_index: usize) -> Result<InclusionProof, MerkleError> {
    if leaf_index >= leaves.len() {
        return Err(MerkleError::IndexOutOfRange {
            index: leaf_index,
            leaves: leaves.len(),
        });
    }
    let mut level: Vec<[u8; 32]> = leaves
        .iter()
        .map(|l| decode_leaf(l))
        .collect::<Result<_, _>>()?;
    let mut idx = leaf_index;
    let mut siblings = Vec::new();
    while level.len() > 1 {
        let promoted = level.len() % 2 == 1 && idx == level.len() - 1;
        if !promoted {
            let (sibling, side) = if idx % 2 == 0 {
                (level[idx + 1], Side::Right)
            } else {
                (level[idx - 1], Side::Left)
            };
            siblings.push(ProofStep {
                side,
                hash: hex::encode(sibling),
            });
        }
        level = next_level(&level);
        idx /= 2;
    }
    Ok(InclusionProof {
        leaf_index: leaf_index as u64,
        leaf_hash: leaves[leaf_index].clone(),
        siblings,
    })
}

/// Fold a proof back to a root and compare.
pub fn verify_inclusion(proof: &InclusionProof, merkle_root_hex: &str) -> bool {
    let Ok(mut node) = decode_leaf(&proof.leaf_hash) else {
        return false;
    };
    for step in &proof.siblings {
        let Ok(sibling) = decode_leaf(&step.hash) else {
            return false;
        };
        node = match step.side {
            Side::Right => parent(&node, &sibling),
            Side::Left => parent(&sibling, &node),
        };
    }
    hex::encode(node) == merkle_root_hex
}

/// Verify the checkpoint chain links; roots are checked against events by
/// the store-level verifier, which has access to the leaf hashes.
pub fn verify_checkpoint_links(checkpoints: &[Checkpoint]) -> Vec<String> {
    let mut findings = Vec::new();
    for (i, cp) in checkpoints.iter().enumerate() {
        let expected = if i == 0 {
            GENESIS_HASH.to_string()
        } else {
            checkpoint_hash(&checkpoints[i - 1])
        };
        if cp.previous_checkpoint_hash != expected {
            findings.push(format!(
                "checkpoint {} previous_checkpoint_hash does not match predecessor",
                cp.checkpoint_id
            ));
        }
        if cp.end_sequence < cp.start_sequence {
            findings.push(format!("checkpoint {} has an inverted range", cp.checkpoint_id));
        }
    }
    findings
}

/// Leaf digests (current_hash values) for a batch of sealed events.
pub fn leaf_hashes(events: &[DecisionEvent]) -> Result<Vec<String>, MerkleError> {
    events
        .iter()
        .enumerate()
        .map(|(index, e)| {
            e.current_hash()
                .map(str::to_string)
                .ok_or(MerkleError::Unsealed { index })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn oracle() -> Value {
        serde_json::from_str(include_str!("../tests/fixtures/merkle_oracle.json")).unwrap()
    }

    fn oracle_leaves(n: usize) -> Vec<String> {
        oracle()["leaves_hex"]
            .as_array()
            .unwrap()
            .iter()
            .take(n)
            .map(|v| v.as_str().unwrap().to_string())
            .collect()
    }

    #[test]
    fn four_leaf_root_matches_frozen_oracle() {
        let leaves = oracle_leaves(4);
        assert_eq!(merkle_root(&leaves).unwrap(), oracle()["root4_hex"].as_str().unwrap());
    }

    #[test]
    fn three_leaf_promotion_matches_frozen_oracle() {
        let leaves = oracle_leaves(3);
        assert_eq!(
            merkle_root(&leaves).unwrap(),
            oracle()["root3_promoted_hex"].as_str().unwrap()
        );
    }

    #[test]
    fn single_leaf_root_is_the_leaf() {
        let leaves = oracle_leaves(1);
        assert_eq!(merkle_root(&leaves).unwrap(), leaves[0]);
        let proof = inclusion_proof(&leaves, 0).unwrap();
        assert!(proof.siblings.is_empty());
        assert!(verify_inclusion(&proof, &leaves[0]));
    }

    #[test]
    fn all_proofs_verify_and_tampered_leaves_fail() {
        for n in [1usize, 2, 3, 4, 5, 7, 8, 33] {
            let leaves: Vec<String> = (0..n).map(|i| sha256_hex(format!("leaf{i}").as_bytes())).collect();
            let root = merkle_root(&leaves).unwrap();
            let max_len = if n == 1 { 0 } else { (n as f64).log2().ceil() as usize };
            for i in 0..n {
                let proof = inclusion_proof(&leaves, i).unwrap();
                assert!(verify_inclusion(&proof, &root), "n={n} i={i}");
                assert!(proof.siblings.len() <= max_len, "n={n} i={i}");

                let mut bad = proof.clone();
                bad.leaf_hash = sha256_hex(b"tampered");
                assert!(!verify_inclusion(&bad, &root), "n={n} i={i} tamper");
            }
            // Non-promoted paths reach the maximum length; index 0 is never
            // promoted for n > 1.
            if n > 1 {
                let proof = inclusion_proof(&leaves, 0).unwrap();
                assert_eq!(proof.siblings.len(), max_len, "n={n}");
            }
        }
    }

    #[test]
    fn out_of_range_index_rejected() {
        let leaves = oracle_leaves(2);
        assert!(matches!(
            inclusion_proof(&leaves, 2),
            Err(MerkleError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn checkpoint_links_chain() {
        let leaves = oracle_leaves(4);
        let a = Checkpoint {
            checkpoint_id: "s:1-4".into(),
            system_id: "s".into(),
            start_sequence: 1,
            end_sequence: 4,
            merkle_root: merkle_root(&leaves).unwrap(),
            previous_checkpoint_hash: GENESIS_HASH.into(),
            algorithm: HASH_ALG_SHA256.into(),
        };
        let b = Checkpoint {
            checkpoint_id: "s:5-8".into(),
            start_sequence: 5,
            end_sequence: 8,
            previous_checkpoint_hash: checkpoint_hash(&a),
            ..a.clone()
        };
        assert!(verify_checkpoint_links(&[a.clone(), b.clone()]).is_empty());

        // Altering a historical checkpoint invalidates later links.
        let mut tampered = a;
        tampered.merkle_root = sha256_hex(b"other");
        assert!(!verify_checkpoint_links(&[tampered, b]).is_empty());
    }
}
