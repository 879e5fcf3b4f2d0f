use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use ed25519_dalek::{Signer as _, Verifier as _};
use hmac::{Hmac, Mac};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rsa::signature::{Keypair as _, SignatureEncoding as _};
use rsa::RsaPrivateKey;
use sha2::Sha256;

use super::TrustError;
use crate::ndn::{Name, SigType};

type HmacSha256 = Hmac<Sha256>;
type RsaSigningKey = rsa::pkcs1v15::SigningKey<Sha256>;
type RsaVerifyingKey = rsa::pkcs1v15::VerifyingKey<Sha256>;

pub const DEFAULT_RSA_BITS: usize = 1024;

#[derive(Clone)]
enum Secret {
    Hmac(Vec<u8>),
    Ed25519(Box<ed25519_dalek::SigningKey>),
    Rsa(Box<RsaSigningKey>),
}

/// Public (verification) material for one key.
#[derive(Clone)]
pub enum PublicKey {
    /// HMAC has no public half: verifiers hold the shared secret.
    Hmac(Vec<u8>),
    Ed25519(ed25519_dalek::VerifyingKey),
    Rsa(Box<RsaVerifyingKey>),
}

impl PublicKey {
    pub fn sig_type(&self) -> SigType {
        match self {
            PublicKey::Hmac(_) => SigType::HmacSha256,
            PublicKey::Ed25519(_) => SigType::Ed25519,
            PublicKey::Rsa(_) => SigType::RsaSha256,
        }
    }

    /// Length in bytes of a signature made with the matching secret.
    pub fn sig_len(&self) -> usize {
        match self {
            PublicKey::Hmac(_) => 32,
            PublicKey::Ed25519(_) => 64,
            PublicKey::Rsa(vk) => {
                let pk: &rsa::RsaPublicKey = vk.as_ref().as_ref();
                rsa::traits::PublicKeyParts::size(pk)
            }
        }
    }

    pub fn verify(&self, msg: &[u8], sig: &[u8]) -> bool {
        match self {
            PublicKey::Hmac(secret) => {
                let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
                mac.update(msg);
                mac.verify_slice(sig).is_ok()
            }
            PublicKey::Ed25519(vk) => ed25519_dalek::Signature::from_slice(sig)
                .map(|s| vk.verify(msg, &s).is_ok())
                .unwrap_or(false),
            PublicKey::Rsa(vk) => rsa::pkcs1v15::Signature::try_from(sig)
                .map(|s| rsa::signature::Verifier::verify(vk.as_ref(), msg, &s).is_ok())
                .unwrap_or(false),
        }
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.sig_type())
    }
}

/// A named key. Records built from secret material can sign; records built
/// with [`KeyRecord::public_only`] can only be handed out for verification.
#[derive(Clone)]
pub struct KeyRecord {
    key_name: Name,
    secret: Option<Secret>,
    public: PublicKey,
}

impl fmt::Debug for KeyRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyRecord")
            .field("key_name", &self.key_name.to_string())
            .field("sig_type", &self.sig_type())
            .field("has_secret", &self.secret.is_some())
            .finish()
    }
}

type RsaCache = Mutex<HashMap<([u8; 32], usize), RsaPrivateKey>>;

fn rsa_key(seed: [u8; 32], bits: usize) -> Result<RsaPrivateKey, TrustError> {
    static CACHE: OnceLock<RsaCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(k) = cache.lock().unwrap().get(&(seed, bits)) {
        return Ok(k.clone());
    }
    // Generation is slow; do it outside the lock.
    let mut rng = ChaCha20Rng::from_seed(seed);
    let key = RsaPrivateKey::new(&mut rng, bits).map_err(|e| TrustError::KeyGeneration(e.to_string()))?;
    cache.lock().unwrap().insert((seed, bits), key.clone());
    Ok(key)
}

impl KeyRecord {
    pub fn hmac(key_name: Name, secret: &[u8]) -> Self {
        Self {
            key_name,
            secret: Some(Secret::Hmac(secret.to_vec())),
            public: PublicKey::Hmac(secret.to_vec()),
        }
    }

    pub fn ed25519(key_name: Name, seed: [u8; 32]) -> Self {
        let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
        let vk = sk.verifying_key();
        Self {
            key_name,
            secret: Some(Secret::Ed25519(Box::new(sk))),
            public: PublicKey::Ed25519(vk),
        }
    }

    /// Deterministic RSA key derived from `seed`; generated keys are cached
    /// per process.
    pub fn rsa(key_name: Name, seed: [u8; 32], bits: usize) -> Result<Self, TrustError> {
        let sk = RsaSigningKey::new(rsa_key(seed, bits)?);
        let vk = sk.verifying_key();
        Ok(Self {
            key_name,
            secret: Some(Secret::Rsa(Box::new(sk))),
            public: PublicKey::Rsa(Box::new(vk)),
        })
    }

    /// Builds a key of `sig_type` from seed material. HMAC uses `seed` as
    /// the shared secret; the asymmetric schemes derive their key pair
    /// from the first 32 bytes (zero padded).
    pub fn from_seed(key_name: Name, sig_type: SigType, seed: &[u8], rsa_bits: usize) -> Result<Self, TrustError> {
        let mut seed32 = [0u8; 32];
        let n = seed.len().min(32);
        seed32[..n].copy_from_slice(&seed[..n]);
        match sig_type {
            SigType::HmacSha256 => Ok(Self::hmac(key_name, seed)),
            SigType::Ed25519 => Ok(Self::ed25519(key_name, seed32)),
            SigType::RsaSha256 => Self::rsa(key_name, seed32, rsa_bits),
            SigType::Unsigned => Err(TrustError::KeyTypeMismatch {
                key: SigType::Unsigned,
                data: SigType::Unsigned,
            }),
        }
    }

    pub fn public_only(key_name: Name, public: PublicKey) -> Self {
        Self {
            key_name,
            secret: None,
            public,
        }
    }

    pub fn key_name(&self) -> &Name {
        &self.key_name
    }

    pub fn sig_type(&self) -> SigType {
        self.public.sig_type()
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn has_secret(&self) -> bool {
        self.secret.is_some()
    }

    /// Raw signature over `msg`.
    pub fn sign_bytes(&self, msg: &[u8]) -> Result<Vec<u8>, TrustError> {
        match self.secret.as_ref().ok_or(TrustError::MissingSecret)? {
            Secret::Hmac(secret) => {
                let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
                mac.update(msg);
                Ok(mac.finalize().into_bytes().to_vec())
            }
            Secret::Ed25519(sk) => Ok(sk.sign(msg).to_bytes().to_vec()),
            Secret::Rsa(sk) => Ok(rsa::signature::Signer::sign(sk.as_ref(), msg).to_vec()),
        }
    }
}

/// Verification material a validator trusts for one key name.
#[derive(Clone, Debug)]
pub struct TrustedKey {
    pub sig_type: SigType,
    pub public: PublicKey,
}

impl From<&KeyRecord> for TrustedKey {
    fn from(k: &KeyRecord) -> Self {
        Self {
            sig_type: k.sig_type(),
            public: k.public.clone(),
        }
    }
}

/// A node's own signing keys plus the public keys it trusts. Validation
/// only ever consults `trusted`.
#[derive(Clone, Debug, Default)]
pub struct KeyStore {
    own: BTreeMap<Name, KeyRecord>,
    trusted: BTreeMap<Name, TrustedKey>,
}

impl KeyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_own(&mut self, key: KeyRecord) -> Result<(), TrustError> {
        if self.own.contains_key(key.key_name()) {
            return Err(TrustError::DuplicateKey(key.key_name().clone()));
        }
        self.own.insert(key.key_name().clone(), key);
        Ok(())
    }

    pub fn trust(&mut self, name: Name, key: TrustedKey) -> Result<(), TrustError> {
        if self.trusted.contains_key(&name) {
            return Err(TrustError::DuplicateKey(name));
        }
        self.trusted.insert(name, key);
        Ok(())
    }

    pub fn own_key(&self, name: &Name) -> Option<&KeyRecord> {
        self.own.get(name)
    }

    pub fn trusted_key(&self, name: &Name) -> Option<&TrustedKey> {
        self.trusted.get(name)
    }

    pub fn trusted_names(&self) -> impl Iterator<Item = &Name> {
        self.trusted.keys()
    }
}
