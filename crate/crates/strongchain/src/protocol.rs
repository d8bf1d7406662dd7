//! Wire payloads exchanged through the round engine.

use crate::core::{Block, BlockHash, MessageId, Transaction};
use crate::tcrypto::DecryptionShare;

/// Tagged union of every message body in the simulator. BRB phase
/// messages carry the instance id plus a body digest; INIT and ECHO
/// additionally carry the body so that a miner that never saw the INIT
/// can still deliver.
#[derive(Debug, Clone)]
pub enum Payload {
    BrbInit {
        instance: MessageId,
        body: Vec<u8>,
    },
    BrbEcho {
        instance: MessageId,
        digest: [u8; 32],
        body: Vec<u8>,
    },
    BrbReady {
        instance: MessageId,
        digest: [u8; 32],
    },
    /// A miner's decryption share for a BR-delivered ciphertext.
    Share {
        instance: MessageId,
        share: DecryptionShare,
    },
    /// Baseline (plaintext) transaction broadcast.
    PlainTx {
        instance: MessageId,
        tx: Transaction,
    },
    /// Leader's block proposal for the slot.
    Proposal {
        slot: u64,
        block: Block,
    },
    /// A miner's vote. Accept votes embed the block so every process
    /// can commit once a quorum forms, regardless of which proposals it
    /// was shown.
    Vote {
        slot: u64,
        block_hash: BlockHash,
        accept: bool,
        block: Option<Block>,
    },
}

pub fn body_digest(body: &[u8]) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(b"strongchain.brb.body");
    h.update(body);
    h.finalize().into()
}
