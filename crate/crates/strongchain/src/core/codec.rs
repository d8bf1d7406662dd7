//! Canonical serialization used for hashing and for carrying
//! transactions inside ciphertexts.
//!
//! Every field is emitted as a 4-byte big-endian length prefix followed
//! by the field bytes, in declaration order. Integers are 8-byte
//! big-endian; process ids are one kind byte (0 = miner, 1 = client)
//! followed by a 4-byte big-endian index. The digest function is
//! SHA-256, recorded in run metadata as `sha-256`.

use super::{BlockHash, ProcessId, ProcessKind, Transaction, TxId};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Name of the digest function, exported into run metadata.
pub const DIGEST_NAME: &str = "sha-256";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("input truncated at offset {0}")]
    Truncated(usize),
    #[error("invalid process kind byte {0}")]
    BadProcessKind(u8),
    #[error("trailing bytes after decode")]
    TrailingBytes,
}

fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    put_field(out, &v.to_be_bytes());
}

fn put_pid(out: &mut Vec<u8>, pid: ProcessId) {
    let mut buf = [0u8; 5];
    buf[0] = match pid.kind {
        ProcessKind::Miner => 0,
        ProcessKind::Client => 1,
    };
    buf[1..].copy_from_slice(&pid.index.to_be_bytes());
    put_field(out, &buf);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn field(&mut self) -> Result<&'a [u8], CodecError> {
        if self.pos + 4 > self.buf.len() {
            return Err(CodecError::Truncated(self.pos));
        }
        let len = u32::from_be_bytes(self.buf[self.pos..self.pos + 4].try_into().unwrap()) as usize;
        self.pos += 4;
        if self.pos + len > self.buf.len() {
            return Err(CodecError::Truncated(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        let f = self.field()?;
        let arr: [u8; 8] = f.try_into().map_err(|_| CodecError::Truncated(self.pos))?;
        Ok(u64::from_be_bytes(arr))
    }

    fn pid(&mut self) -> Result<ProcessId, CodecError> {
        let f = self.field()?;
        if f.len() != 5 {
            return Err(CodecError::Truncated(self.pos));
        }
        let kind = match f[0] {
            0 => ProcessKind::Miner,
            1 => ProcessKind::Client,
            other => return Err(CodecError::BadProcessKind(other)),
        };
        let index = u32::from_be_bytes(f[1..5].try_into().unwrap());
        Ok(ProcessId { kind, index })
    }
}

/// Canonical encoding of a transaction body (txid excluded; it is a
/// function of these bytes).
pub fn encode_tx(tx: &Transaction) -> Vec<u8> {
    let mut out = Vec::with_capacity(tx.payload.len() + 64);
    put_pid(&mut out, tx.client);
    put_u64(&mut out, tx.nonce);
    put_field(&mut out, &tx.payload);
    put_u64(&mut out, tx.fee);
    out
}

/// Decode a transaction from its canonical encoding, recomputing the
/// txid from the decoded fields.
pub fn decode_tx(bytes: &[u8]) -> Result<Transaction, CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let client = r.pid()?;
    let nonce = r.u64()?;
    let payload = r.field()?.to_vec();
    let fee = r.u64()?;
    if r.pos != bytes.len() {
        return Err(CodecError::TrailingBytes);
    }
    Ok(Transaction::new(client, nonce, payload, fee))
}

pub fn tx_digest(client: ProcessId, nonce: u64, payload: &[u8], fee: u64) -> TxId {
    let mut out = Vec::with_capacity(payload.len() + 64);
    put_pid(&mut out, client);
    put_u64(&mut out, nonce);
    put_field(&mut out, payload);
    put_u64(&mut out, fee);
    let mut h = Sha256::new();
    h.update(b"strongchain.tx");
    h.update(&out);
    TxId(h.finalize().into())
}

pub fn block_digest(parent: BlockHash, proposer: ProcessId, txs: &[Transaction]) -> BlockHash {
    let mut h = Sha256::new();
    h.update(b"strongchain.block");
    let mut buf = Vec::new();
    put_field(&mut buf, &parent.0);
    put_pid(&mut buf, proposer);
    for tx in txs {
        put_field(&mut buf, &encode_tx(tx));
    }
    h.update(&buf);
    BlockHash(h.finalize().into())
}
