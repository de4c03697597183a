//! Event sealing cryptography.
//!
//! Compute order for a signed event: the signature is computed over the
//! canonical payload excluding both `signature_value` and `current_hash`;
//! `current_hash` is then computed over the payload including
//! `signature_value`. Verifying either side therefore reconstructs the
//! exact byte view it was produced from.

use crate::canonical;
use crate::event::{Base64String, DecisionEvent, DigitalSignature, Hex64};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default hash algorithm token.
pub const HASH_ALG_SHA256: &str = "sha-256";
/// Default signature algorithm token.
pub const SIG_ALG_ED25519: &str = "ed25519";
/// Accepted as a token value; signing with it is not implemented here.
pub const SIG_ALG_ECDSA_P256: &str = "ecdsa-p256";

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("seal precondition not met: {0}")]
    SealPrecondition(String),
    #[error("event is already sealed (current_hash present)")]
    AlreadySealed,
    #[error("no digital_signature present")]
    MissingSignature,
    #[error("unsupported algorithm token {0:?}")]
    UnsupportedAlgorithm(String),
    #[error("deployment key must be nonempty")]
    EmptyKey,
    #[error("malformed key material: {0}")]
    BadKey(String),
    #[error(transparent)]
    Canonical(#[from] canonical::CanonicalError),
}

/// A digest over the canonical byte view of a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedDigest {
    pub algorithm: String,
    pub hex: Hex64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Remove `temporal_metadata.hash_chain.current_hash` from a JSON view.
pub fn strip_current_hash(view: &mut Value) {
    if let Some(chain) = view
        .get_mut("temporal_metadata")
        .and_then(|t| t.get_mut("hash_chain"))
        .and_then(Value::as_object_mut)
    {
        chain.remove("current_hash");
    }
}

/// Remove `temporal_metadata.digital_signature.signature_value` from a JSON
/// view; the rest of the signature object stays in the signed bytes.
pub fn strip_signature_value(view: &mut Value) {
    if let Some(sig) = view
        .get_mut("temporal_metadata")
        .and_then(|t| t.get_mut("digital_signature"))
        .and_then(Value::as_object_mut)
    {
        sig.remove("signature_value");
    }
}

/// Hash an event with `current_hash` excluded from the input. The signature
/// value, when present, is included.
pub fn compute_event_hash(event: &DecisionEvent) -> Result<SealedDigest, CryptoError> {
    let temporal = event
        .temporal_metadata
        .as_ref()
        .ok_or_else(|| CryptoError::SealPrecondition("temporal_metadata missing".into()))?;
    if temporal.sequence_number.is_none() {
        return Err(CryptoError::SealPrecondition("sequence_number not set".into()));
    }
    let chain = temporal
        .hash_chain
        .as_ref()
        .ok_or_else(|| CryptoError::SealPrecondition("hash_chain not set".into()))?;
    if chain.previous_hash.is_none() {
        return Err(CryptoError::SealPrecondition("previous_hash not set".into()));
    }
    if let Some(alg) = chain.algorithm.as_deref() {
        if alg != HASH_ALG_SHA256 {
            return Err(CryptoError::UnsupportedAlgorithm(alg.to_string()));
        }
    }

    let mut view = event.to_value();
    strip_current_hash(&mut view);
    let bytes = canonical::canonicalize(&view)?;
    let hex = Hex64::parse(&sha256_hex(&bytes)).expect("sha-256 hex is 64 lowercase chars");
    Ok(SealedDigest {
        algorithm: HASH_ALG_SHA256.to_string(),
        hex,
    })
}

/// Signing identity: an Ed25519 key plus the signer metadata carried in the
/// event. Key management beyond raw seeds is out of scope.
#[derive(Clone)]
pub struct EventSigner {
    key: SigningKey,
    pub signer_id: String,
    pub certificate_ref: Option<String>,
}

impl EventSigner {
    pub fn new(key: SigningKey, signer_id: impl Into<String>, certificate_ref: Option<String>) -> Self {
        EventSigner {
            key,
            signer_id: signer_id.into(),
            certificate_ref,
        }
    }

    /// Build from a 64-char hex seed (e.g. `openssl rand -hex 32`).
    pub fn from_seed_hex(
        seed_hex: &str,
        signer_id: impl Into<String>,
        certificate_ref: Option<String>,
    ) -> Result<Self, CryptoError> {
        let bytes = hex::decode(seed_hex.trim()).map_err(|e| CryptoError::BadKey(e.to_string()))?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadKey("seed must be 32 bytes".into()))?;
        Ok(Self::new(SigningKey::from_bytes(&seed), signer_id, certificate_ref))
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub(crate) fn signing_key(&self) -> &SigningKey {
        &self.key
    }
}

/// Sign an unsealed event. Returns the full signature object to attach; the
/// caller then computes `current_hash` over the payload including
/// `signature_value`.
pub fn sign_event(event: &DecisionEvent, signer: &EventSigner) -> Result<DigitalSignature, CryptoError> {
    if event.is_sealed() {
        return Err(CryptoError::AlreadySealed);
    }
    let mut with_meta = event.clone();
    let temporal = with_meta.temporal_metadata.get_or_insert_with(Default::default);
    temporal.digital_signature = Some(DigitalSignature {
        signer_id: Some(signer.signer_id.clone()),
        signature_value: None,
        algorithm: Some(SIG_ALG_ED25519.to_string()),
        certificate_ref: signer.certificate_ref.clone(),
        extensions: Default::default(),
    });

    let mut view = with_meta.to_value();
    strip_current_hash(&mut view);
    strip_signature_value(&mut view);
    let bytes = canonical::canonicalize(&view)?;
    let sig = signer.key.sign(&bytes);

    let mut signature = with_meta
        .temporal_metadata
        .and_then(|t| t.digital_signature)
        .expect("signature object attached above");
    signature.signature_value = Some(Base64String::encode(&sig.to_bytes()));
    Ok(signature)
}

/// Verify a signature over the byte view excluding `signature_value` and
/// `current_hash`. Returns false for a valid-shaped but wrong signature.
pub fn verify_signature(event: &DecisionEvent, public_key: &VerifyingKey) -> Result<bool, CryptoError> {
    let sig = event
        .temporal_metadata
        .as_ref()
        .and_then(|t| t.digital_signature.as_ref())
        .ok_or(CryptoError::MissingSignature)?;
    match sig.algorithm.as_deref() {
        Some(SIG_ALG_ED25519) | None => {}
        Some(other) => return Err(CryptoError::UnsupportedAlgorithm(other.to_string())),
    }
    let Some(value) = sig.signature_value.as_ref() else {
        return Err(CryptoError::MissingSignature);
    };
    let raw = value.decode();
    let Ok(raw64): Result<[u8; 64], _> = raw.try_into() else {
        return Ok(false);
    };
    let signature = Signature::from_bytes(&raw64);

    let mut view = event.to_value();
    strip_current_hash(&mut view);
    strip_signature_value(&mut view);
    let bytes = canonical::canonicalize(&view)?;
    Ok(public_key.verify(&bytes, &signature).is_ok())
}

/// Keyed digest of a canonicalized value (HMAC-SHA-256). Deterministic per
/// deployment and resistant to dictionary reversal of low-entropy values.
pub fn hash_sensitive_value(value: &Value, deployment_key: &str) -> Result<String, CryptoError> {
    if deployment_key.is_empty() {
        return Err(CryptoError::EmptyKey);
    }
    let bytes = canonical::canonicalize(value)?;
    let mut mac = Hmac::<Sha256>::new_from_slice(deployment_key.as_bytes())
        .expect("HMAC accepts any key length");
    mac.update(&bytes);
    Ok(hex::encode(mac.finalize().into_bytes()))
}

/// Plain unkeyed digest of a canonicalized value. Only for values where
/// dictionary reversal is not a concern (e.g. size-trimming projections);
/// prefer [`hash_sensitive_value`] for personal data.
pub fn hash_value_unkeyed(value: &Value) -> Result<String, CryptoError> {
    let bytes = canonical::canonicalize(value)?;
    Ok(sha256_hex(&bytes))
}
