//! Keys, Data signing, trust schema, and the three-stage Data validator.

mod keys;
mod schema;

pub use keys::{KeyRecord, KeyStore, PublicKey, TrustedKey, DEFAULT_RSA_BITS};
pub use schema::{TrustRule, TrustSchema};

use serde::Serialize;
use thiserror::Error;

use crate::ndn::{Data, Name, SigType};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrustError {
    #[error("key is {key} but data declares {data}")]
    KeyTypeMismatch { key: SigType, data: SigType },
    #[error("data key locator {locator} does not name signing key {key}")]
    LocatorMismatch { locator: Name, key: Name },
    #[error("key has no secret material")]
    MissingSecret,
    #[error("duplicate key {0}")]
    DuplicateKey(Name),
    #[error("duplicate schema rule for {0}")]
    DuplicateRule(Name),
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
}

/// Signs `unsigned` with `key`, filling in the signature value.
pub fn sign_data(mut unsigned: Data, key: &KeyRecord) -> Result<Data, TrustError> {
    if unsigned.sig_type != key.sig_type() {
        return Err(TrustError::KeyTypeMismatch {
            key: key.sig_type(),
            data: unsigned.sig_type,
        });
    }
    if &unsigned.key_locator != key.key_name() {
        return Err(TrustError::LocatorMismatch {
            locator: unsigned.key_locator.clone(),
            key: key.key_name().clone(),
        });
    }
    unsigned.sig_value = key.sign_bytes(&unsigned.signed_portion())?;
    Ok(unsigned)
}

/// Cryptographic check only: does `d` carry a valid signature under `key`?
pub fn verify_data(d: &Data, key: &TrustedKey) -> bool {
    d.sig_type == key.sig_type && key.public.verify(&d.signed_portion(), &d.sig_value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectStage {
    /// Signature type does not match the registered key (or key unknown).
    Type,
    /// Schema does not allow this key to sign this name.
    KeyName,
    /// Signature does not verify.
    Signature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validation {
    Accept,
    Reject { stage: RejectStage, detail: String },
}

impl Validation {
    pub fn is_accept(&self) -> bool {
        matches!(self, Validation::Accept)
    }

    pub fn stage(&self) -> Option<RejectStage> {
        match self {
            Validation::Accept => None,
            Validation::Reject { stage, .. } => Some(*stage),
        }
    }
}

fn reject(stage: RejectStage, detail: String) -> Validation {
    Validation::Reject { stage, detail }
}

/// Validates `d` in three ordered stages and reports the first failure:
/// signature type against the key named by the key locator, then the
/// schema's required key name for `d.name`, then the signature itself.
pub fn validate_data(d: &Data, store: &KeyStore, schema: &TrustSchema) -> Validation {
    let Some(key) = store.trusted_key(&d.key_locator) else {
        return reject(RejectStage::Type, format!("unknown key {}", d.key_locator));
    };
    if key.sig_type != d.sig_type {
        return reject(
            RejectStage::Type,
            format!("data is {} but {} is {}", d.sig_type, d.key_locator, key.sig_type),
        );
    }
    match schema.lookup(&d.name) {
        None => return reject(RejectStage::KeyName, format!("no rule covers {}", d.name)),
        Some(required) if required != &d.key_locator => {
            return reject(
                RejectStage::KeyName,
                format!("{} must be signed by {required}, not {}", d.name, d.key_locator),
            )
        }
        Some(_) => {}
    }
    if !key.public.verify(&d.signed_portion(), &d.sig_value) {
        return reject(RejectStage::Signature, format!("bad signature on {}", d.name));
    }
    Validation::Accept
}
