//! Discrete-log backend: threshold ElGamal-style KEM over a fixed
//! safe-prime group, with Chaum-Pedersen equality proofs attached to
//! every decryption share.
//!
//! The dealer shares the KEM secret with a degree-(k-1) polynomial over
//! the prime-order exponent field; combining interpolates in the
//! exponent. The group is a 256-bit safe prime (p = 2q + 1) with g = 4
//! generating the order-q subgroup — large enough that the Fiat-Shamir
//! challenge space exceeds 2^64, small enough for fast desk-scale runs.

use super::{
    keystream_xor, payload_tag, BackendKind, Ciphertext, CryptoError, DecryptionShare, KemPart,
    KeyMaterial, PublicKey, SecretShare, ShareValue, VerificationKey,
};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::sync::OnceLock;

const P_HEX: &str = "1ddfab2e5c87df072aa392ed56fd30ed869d74943ada252eebfd1e80a0d074c5f";
const Q_HEX: &str = "eefd5972e43ef839551c976ab7e9876c34eba4a1d6d129775fe8f4050683a62f";

pub(crate) struct Group {
    pub p: BigUint,
    pub q: BigUint,
    pub g: BigUint,
}

pub(crate) fn group() -> &'static Group {
    static GROUP: OnceLock<Group> = OnceLock::new();
    GROUP.get_or_init(|| Group {
        p: BigUint::parse_bytes(P_HEX.as_bytes(), 16).unwrap(),
        q: BigUint::parse_bytes(Q_HEX.as_bytes(), 16).unwrap(),
        g: BigUint::from(4u32),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogPublic {
    /// g^s, the joint KEM public key.
    pub h: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogVerification {
    /// Per-holder commitments h_i = g^{s_i}, indexed by holder - 1.
    pub commitments: Vec<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogSecret {
    pub(crate) s_i: BigUint,
}

/// sigma_i = u^{s_i} plus a Chaum-Pedersen proof that
/// log_g(h_i) = log_u(sigma_i).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogShare {
    pub sigma: BigUint,
    pub proof_commit_g: BigUint,
    pub proof_commit_u: BigUint,
    pub proof_response: BigUint,
}

fn random_scalar(rng: &mut ChaCha20Rng, q: &BigUint) -> BigUint {
    let mut bytes = vec![0u8; (q.bits() as usize).div_ceil(8) + 16];
    rng.fill_bytes(&mut bytes);
    BigUint::from_bytes_be(&bytes) % q
}

fn hash_to_scalar(parts: &[&[u8]], q: &BigUint) -> BigUint {
    let mut h = Sha256::new();
    h.update(b"strongchain.dlog");
    for part in parts {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part);
    }
    let first: [u8; 32] = h.finalize().into();
    let mut h2 = Sha256::new();
    h2.update(b"strongchain.dlog2");
    h2.update(first);
    let second: [u8; 32] = h2.finalize().into();
    let mut wide = first.to_vec();
    wide.extend_from_slice(&second);
    BigUint::from_bytes_be(&wide) % q
}

pub(super) fn generate(n: usize, k: usize, seed: u64) -> Result<KeyMaterial, CryptoError> {
    let grp = group();
    let mut h = Sha256::new();
    h.update(b"strongchain.dlog.dealer");
    h.update(seed.to_be_bytes());
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());

    // degree-(k-1) polynomial, f(0) = s
    let coeffs: Vec<BigUint> = (0..k).map(|_| random_scalar(&mut rng, &grp.q)).collect();
    let eval = |x: u64| -> BigUint {
        let x = BigUint::from(x);
        let mut acc = BigUint::zero();
        let mut pow = BigUint::one();
        for c in &coeffs {
            acc = (acc + c * &pow) % &grp.q;
            pow = (&pow * &x) % &grp.q;
        }
        acc
    };

    let secrets: Vec<BigUint> = (1..=n as u64).map(eval).collect();
    let commitments: Vec<BigUint> =
        secrets.iter().map(|s| grp.g.modpow(s, &grp.p)).collect();
    Ok(KeyMaterial {
        backend: BackendKind::Dlog,
        n_holders: n,
        threshold: k,
        public: PublicKey::Dlog(DlogPublic { h: grp.g.modpow(&coeffs[0], &grp.p) }),
        verification: VerificationKey::Dlog(DlogVerification { commitments }),
        shares: secrets.into_iter().map(|s_i| SecretShare::Dlog(DlogSecret { s_i })).collect(),
    })
}

pub(super) fn encrypt(
    pk: &DlogPublic,
    m: &[u8],
    label: &[u8],
    rng: &mut ChaCha20Rng,
) -> Ciphertext {
    let grp = group();
    let r = random_scalar(rng, &grp.q);
    let u = grp.g.modpow(&r, &grp.p);
    let w = pk.h.modpow(&r, &grp.p);
    let w_bytes = w.to_bytes_be();
    let payload = keystream_xor(&w_bytes, label, m);
    let tag = payload_tag(&w_bytes, label, m);
    Ciphertext { label: label.to_vec(), kem: KemPart::Dlog { u }, payload, tag }
}

fn kem_element(c: &Ciphertext) -> Option<&BigUint> {
    match &c.kem {
        KemPart::Dlog { u } => Some(u),
        KemPart::Mock => None,
    }
}

pub(super) fn share(sk: &DlogSecret, holder: usize, c: &Ciphertext) -> DecryptionShare {
    let grp = group();
    let u = kem_element(c).cloned().unwrap_or_else(BigUint::zero);
    let sigma = u.modpow(&sk.s_i, &grp.p);
    // deterministic proof nonce bound to (secret, ciphertext)
    let nonce = hash_to_scalar(
        &[b"nonce", &sk.s_i.to_bytes_be(), &c.digest(), &(holder as u64).to_be_bytes()],
        &grp.q,
    );
    let commit_g = grp.g.modpow(&nonce, &grp.p);
    let commit_u = u.modpow(&nonce, &grp.p);
    let challenge = proof_challenge(c, holder, &sigma, &commit_g, &commit_u);
    let response = (&nonce + challenge * &sk.s_i) % &grp.q;
    DecryptionShare {
        holder,
        value: ShareValue::Dlog(DlogShare {
            sigma,
            proof_commit_g: commit_g,
            proof_commit_u: commit_u,
            proof_response: response,
        }),
    }
}

fn proof_challenge(
    c: &Ciphertext,
    holder: usize,
    sigma: &BigUint,
    commit_g: &BigUint,
    commit_u: &BigUint,
) -> BigUint {
    let grp = group();
    hash_to_scalar(
        &[
            b"chal",
            &c.digest(),
            &(holder as u64).to_be_bytes(),
            &sigma.to_bytes_be(),
            &commit_g.to_bytes_be(),
            &commit_u.to_bytes_be(),
        ],
        &grp.q,
    )
}

pub(super) fn verify(vk: &DlogVerification, c: &Ciphertext, holder: usize, s: &DlogShare) -> bool {
    let grp = group();
    let Some(u) = kem_element(c) else {
        return false;
    };
    let Some(h_i) = vk.commitments.get(holder.wrapping_sub(1)) else {
        return false;
    };
    if s.sigma.is_zero() || s.sigma >= grp.p {
        return false;
    }
    let challenge = proof_challenge(c, holder, &s.sigma, &s.proof_commit_g, &s.proof_commit_u);
    let lhs_g = grp.g.modpow(&s.proof_response, &grp.p);
    let rhs_g = (&s.proof_commit_g * h_i.modpow(&challenge, &grp.p)) % &grp.p;
    if lhs_g != rhs_g {
        return false;
    }
    let lhs_u = u.modpow(&s.proof_response, &grp.p);
    let rhs_u = (&s.proof_commit_u * s.sigma.modpow(&challenge, &grp.p)) % &grp.p;
    lhs_u == rhs_u
}

fn mod_inv(a: &BigUint, q: &BigUint) -> BigUint {
    // q is prime
    a.modpow(&(q - 2u32), q)
}

/// Lagrange coefficient at zero for holder `i` over the index set.
fn lagrange_at_zero(i: u64, indices: &[u64], q: &BigUint) -> BigUint {
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    let xi = BigUint::from(i) % q;
    for &j in indices {
        if j == i {
            continue;
        }
        let xj = BigUint::from(j) % q;
        num = (num * &xj) % q;
        let diff = (&xj + q - &xi) % q;
        den = (den * diff) % q;
    }
    (num * mod_inv(&den, q)) % q
}

pub(super) fn combine(
    vk: &DlogVerification,
    c: &Ciphertext,
    shares: &[&DecryptionShare],
) -> Result<Vec<u8>, CryptoError> {
    let _ = vk;
    let grp = group();
    if kem_element(c).is_none() {
        return Err(CryptoError::MalformedCiphertext);
    }
    let indices: Vec<u64> = shares.iter().map(|s| s.holder as u64).collect();
    let mut w = BigUint::one();
    for s in shares {
        let ShareValue::Dlog(v) = &s.value else {
            return Err(CryptoError::InvalidShare { holder: s.holder });
        };
        let lambda = lagrange_at_zero(s.holder as u64, &indices, &grp.q);
        w = (w * v.sigma.modpow(&lambda, &grp.p)) % &grp.p;
    }
    let w_bytes = w.to_bytes_be();
    let m = keystream_xor(&w_bytes, &c.label, &c.payload);
    if payload_tag(&w_bytes, &c.label, &m) != c.tag {
        return Err(CryptoError::TagMismatch);
    }
    Ok(m)
}
