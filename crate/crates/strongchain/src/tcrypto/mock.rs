//! Deterministic mock backend: shares are keyed digests under dealt
//! per-holder keys, and the payload mask derives from a dealer secret
//! escrowed in the verification key. Functionally honors the threshold
//! interface (share counting, verification, tag checks) without any
//! hardness assumption; intended for fast protocol tests.

use super::{
    keystream_xor, payload_tag, BackendKind, Ciphertext, CryptoError, DecryptionShare, KemPart,
    KeyMaterial, PublicKey, SecretShare, ShareValue, VerificationKey,
};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockPublic {
    pub(crate) pad_seed: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockVerification {
    pub(crate) pad_seed: [u8; 32],
    pub(crate) mac_keys: Vec<[u8; 32]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockSecret {
    pub(crate) mac_key: [u8; 32],
}

fn derive(tag: &[u8], seed: u64, extra: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"strongchain.mock");
    h.update(tag);
    h.update(seed.to_be_bytes());
    h.update(extra.to_be_bytes());
    h.finalize().into()
}

pub(super) fn generate(n: usize, k: usize, seed: u64) -> Result<KeyMaterial, CryptoError> {
    let pad_seed = derive(b"pad", seed, 0);
    let mac_keys: Vec<[u8; 32]> = (1..=n as u64).map(|i| derive(b"mac", seed, i)).collect();
    Ok(KeyMaterial {
        backend: BackendKind::Mock,
        n_holders: n,
        threshold: k,
        public: PublicKey::Mock(MockPublic { pad_seed }),
        verification: VerificationKey::Mock(MockVerification {
            pad_seed,
            mac_keys: mac_keys.clone(),
        }),
        shares: mac_keys
            .into_iter()
            .map(|mac_key| SecretShare::Mock(MockSecret { mac_key }))
            .collect(),
    })
}

pub(super) fn encrypt(pk: &MockPublic, m: &[u8], label: &[u8]) -> Ciphertext {
    let payload = keystream_xor(&pk.pad_seed, label, m);
    let tag = payload_tag(&pk.pad_seed, label, m);
    Ciphertext { label: label.to_vec(), kem: KemPart::Mock, payload, tag }
}

fn mac(key: &[u8; 32], holder: usize, ct_digest: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"strongchain.mock.share");
    h.update(key);
    h.update((holder as u64).to_be_bytes());
    h.update(ct_digest);
    h.finalize().into()
}

pub(super) fn share(sk: &MockSecret, holder: usize, c: &Ciphertext) -> DecryptionShare {
    DecryptionShare { holder, value: ShareValue::Mock(mac(&sk.mac_key, holder, &c.digest())) }
}

pub(super) fn verify(
    vk: &MockVerification,
    c: &Ciphertext,
    holder: usize,
    value: &[u8; 32],
) -> bool {
    let Some(key) = vk.mac_keys.get(holder.wrapping_sub(1)) else {
        return false;
    };
    mac(key, holder, &c.digest()) == *value
}

pub(super) fn combine(vk: &MockVerification, c: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    if c.kem != KemPart::Mock {
        return Err(CryptoError::MalformedCiphertext);
    }
    let m = keystream_xor(&vk.pad_seed, &c.label, &c.payload);
    if payload_tag(&vk.pad_seed, &c.label, &m) != c.tag {
        return Err(CryptoError::TagMismatch);
    }
    Ok(m)
}
