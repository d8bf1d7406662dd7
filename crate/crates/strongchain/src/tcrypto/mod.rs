//! Non-interactive (k, n) threshold encryption behind the five-function
//! interface generate / encrypt / share / verify / combine.
//!
//! Two interchangeable backends:
//! - `mock`: dealer-escrowed pads with MAC shares, for fast
//!   deterministic protocol tests;
//! - `dlog`: threshold ElGamal-style KEM over a fixed 256-bit
//!   safe-prime group with Chaum-Pedersen share proofs.

pub mod dlog;
pub mod mock;

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("threshold k={k} out of range for {n} holders")]
    BadThreshold { k: usize, n: usize },
    #[error("need {needed} shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("share from holder {holder} failed verification")]
    InvalidShare { holder: usize },
    #[error("integrity tag mismatch after combine")]
    TagMismatch,
    #[error("malformed ciphertext")]
    MalformedCiphertext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Dlog,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Mock => "mock",
            BackendKind::Dlog => "dlog",
        })
    }
}

/// Public encryption key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicKey {
    Mock(mock::MockPublic),
    Dlog(dlog::DlogPublic),
}

/// Verification key: enough to verify any holder's share without any
/// secret share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerificationKey {
    Mock(mock::MockVerification),
    Dlog(dlog::DlogVerification),
}

/// One holder's private share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecretShare {
    Mock(mock::MockSecret),
    Dlog(dlog::DlogSecret),
}

/// Threshold-encrypted envelope: label, KEM part, masked payload and an
/// integrity tag binding label to payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub label: Vec<u8>,
    pub kem: KemPart,
    pub payload: Vec<u8>,
    pub tag: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KemPart {
    Mock,
    Dlog { u: num_bigint::BigUint },
}

impl Ciphertext {
    /// Stable digest used to bind shares and proofs to one ciphertext.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"strongchain.ct");
        h.update((self.label.len() as u32).to_be_bytes());
        h.update(&self.label);
        match &self.kem {
            KemPart::Mock => h.update([0u8]),
            KemPart::Dlog { u } => {
                h.update([1u8]);
                h.update(u.to_bytes_be());
            }
        }
        h.update((self.payload.len() as u32).to_be_bytes());
        h.update(&self.payload);
        h.update(self.tag);
        h.finalize().into()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

/// A holder's decryption share plus its validity proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecryptionShare {
    pub holder: usize,
    pub value: ShareValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShareValue {
    Mock([u8; 32]),
    Dlog(dlog::DlogShare),
}

/// Dealer output: public key, verification key and one secret share per
/// holder (holders are 1..=n). Immutable after generation.
#[derive(Debug, Clone)]
pub struct KeyMaterial {
    pub backend: BackendKind,
    pub n_holders: usize,
    pub threshold: usize,
    pub public: PublicKey,
    pub verification: VerificationKey,
    pub shares: Vec<SecretShare>,
}

impl KeyMaterial {
    pub fn secret_for(&self, holder: usize) -> &SecretShare {
        &self.shares[holder - 1]
    }
}

/// Trusted-dealer setup for `n_holders` holders with reconstruction
/// threshold `k`. Deterministic in `seed`.
pub fn generate(
    backend: BackendKind,
    n_holders: usize,
    k: usize,
    seed: u64,
) -> Result<KeyMaterial, CryptoError> {
    if k == 0 || k > n_holders {
        return Err(CryptoError::BadThreshold { k, n: n_holders });
    }
    match backend {
        BackendKind::Mock => mock::generate(n_holders, k, seed),
        BackendKind::Dlog => dlog::generate(n_holders, k, seed),
    }
}

/// Encrypt `m` under `pk` with label `L`. The ciphertext hides `m` from
/// any coalition holding fewer than k shares of it.
pub fn encrypt(pk: &PublicKey, m: &[u8], label: &[u8], rng: &mut ChaCha20Rng) -> Ciphertext {
    match pk {
        PublicKey::Mock(p) => mock::encrypt(p, m, label),
        PublicKey::Dlog(p) => dlog::encrypt(p, m, label, rng),
    }
}

/// Produce holder `i`'s decryption share for `c`. Deterministic per
/// (secret, ciphertext).
pub fn share(sk: &SecretShare, holder: usize, c: &Ciphertext) -> DecryptionShare {
    match sk {
        SecretShare::Mock(s) => mock::share(s, holder, c),
        SecretShare::Dlog(s) => dlog::share(s, holder, c),
    }
}

/// 1 iff the share was produced with a dealt secret for this exact
/// ciphertext; 0 covers forged, corrupted, or mismatched shares.
pub fn verify(vk: &VerificationKey, c: &Ciphertext, s: &DecryptionShare) -> bool {
    match (vk, &s.value) {
        (VerificationKey::Mock(v), ShareValue::Mock(val)) => mock::verify(v, c, s.holder, val),
        (VerificationKey::Dlog(v), ShareValue::Dlog(val)) => dlog::verify(v, c, s.holder, val),
        _ => false,
    }
}

/// Reconstruct the plaintext from at least k verified shares from
/// distinct holders.
pub fn combine(
    vk: &VerificationKey,
    c: &Ciphertext,
    threshold: usize,
    shares: &[DecryptionShare],
) -> Result<Vec<u8>, CryptoError> {
    let mut by_holder = std::collections::BTreeMap::new();
    for s in shares {
        by_holder.entry(s.holder).or_insert(s);
    }
    if by_holder.len() < threshold {
        return Err(CryptoError::InsufficientShares { needed: threshold, got: by_holder.len() });
    }
    for s in by_holder.values() {
        if !verify(vk, c, s) {
            return Err(CryptoError::InvalidShare { holder: s.holder });
        }
    }
    let picked: Vec<&DecryptionShare> = by_holder.values().copied().take(threshold).collect();
    match vk {
        VerificationKey::Mock(v) => mock::combine(v, c),
        VerificationKey::Dlog(v) => dlog::combine(v, c, &picked),
    }
}

/// SHA-256 based expanding keystream, XORed over the payload.
pub(crate) fn keystream_xor(key_material: &[u8], label: &[u8], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let mut counter: u64 = 0;
    while out.len() < data.len() {
        let mut h = Sha256::new();
        h.update(b"strongchain.ks");
        h.update((key_material.len() as u32).to_be_bytes());
        h.update(key_material);
        h.update((label.len() as u32).to_be_bytes());
        h.update(label);
        h.update(counter.to_be_bytes());
        let block: [u8; 32] = h.finalize().into();
        out.extend_from_slice(&block);
        counter += 1;
    }
    out.truncate(data.len());
    for (o, d) in out.iter_mut().zip(data) {
        *o ^= d;
    }
    out
}

pub(crate) fn payload_tag(key_material: &[u8], label: &[u8], plaintext: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"strongchain.tag");
    h.update((key_material.len() as u32).to_be_bytes());
    h.update(key_material);
    h.update((label.len() as u32).to_be_bytes());
    h.update(label);
    h.update(plaintext);
    h.finalize().into()
}
