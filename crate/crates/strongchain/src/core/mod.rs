//! Domain types shared by every other module: process identities,
//! transactions, blocks, the block tree, trace events and the
//! happens-before relation over messages.

pub mod codec;
pub mod hb;
pub mod tree;

use serde::{Deserialize, Serialize};
use std::fmt;

pub use hb::{HappensBefore, HbError};
pub use tree::{BlockTree, TreeError};

/// Role of a process in the system. Miners participate in broadcast
/// quorums and consensus; clients only broadcast transactions and
/// observe commits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Miner,
    Client,
}

/// Engine-stamped process identity. Miner indices are 1..=n and fixed
/// for a run; client indices live in a separate namespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcessId {
    pub kind: ProcessKind,
    pub index: u32,
}

impl ProcessId {
    pub const fn miner(index: u32) -> Self {
        ProcessId { kind: ProcessKind::Miner, index }
    }

    pub const fn client(index: u32) -> Self {
        ProcessId { kind: ProcessKind::Client, index }
    }

    pub fn is_miner(&self) -> bool {
        self.kind == ProcessKind::Miner
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ProcessKind::Miner => write!(f, "m{}", self.index),
            ProcessKind::Client => write!(f, "c{}", self.index),
        }
    }
}

/// 32-byte content digest of a transaction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

/// 32-byte block digest. The genesis block uses the all-zero hash.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockHash(pub [u8; 32]);

impl BlockHash {
    pub const GENESIS: BlockHash = BlockHash([0u8; 32]);
}

macro_rules! digest_impls {
    ($ty:ident) => {
        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($ty), "({}..)"), &hex::encode(&self.0[..6]))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }

        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
                let arr: [u8; 32] = bytes
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("expected 32-byte hex digest"))?;
                Ok($ty(arr))
            }
        }
    };
}

digest_impls!(TxId);
digest_impls!(BlockHash);

/// Identity of a broadcast message: the stamped sender plus a label
/// unique per sender. Used both for engine envelopes (engine-assigned
/// label) and broadcast instances (sender-chosen label).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId {
    pub sender: ProcessId,
    #[serde(with = "hex_bytes")]
    pub label: Vec<u8>,
}

impl MessageId {
    pub fn new(sender: ProcessId, label: Vec<u8>) -> Self {
        MessageId { sender, label }
    }

    /// Label built from a sender-scoped sequence number.
    pub fn from_seq(sender: ProcessId, seq: u64) -> Self {
        MessageId { sender, label: seq.to_be_bytes().to_vec() }
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.sender, hex::encode(&self.label))
    }
}

/// Hex serde adapter for opaque byte strings.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(&text).map_err(serde::de::Error::custom)
    }
}

/// Client-signed payload with a fee; the unit recorded on chain.
/// The txid is a pure function of the remaining fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub txid: TxId,
    pub client: ProcessId,
    pub nonce: u64,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub fee: u64,
}

impl Transaction {
    pub fn new(client: ProcessId, nonce: u64, payload: Vec<u8>, fee: u64) -> Self {
        let txid = codec::tx_digest(client, nonce, &payload, fee);
        Transaction { txid, client, nonce, payload, fee }
    }
}

/// A delivered transaction plus its computed causal past and delivery
/// round. The causal past is immutable after creation and contains only
/// txids delivered in strictly earlier rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MempoolEntry {
    pub tx: Transaction,
    pub delivery_round: u64,
    pub causal_past: std::collections::BTreeSet<TxId>,
}

/// An ordered transaction batch extending one parent block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub parent: BlockHash,
    pub height: u64,
    pub proposer: ProcessId,
    pub txs: Vec<Transaction>,
    pub hash: BlockHash,
}

impl Block {
    /// Build a block on top of `parent`, computing height and hash.
    pub fn build(parent: &Block, proposer: ProcessId, txs: Vec<Transaction>) -> Self {
        let hash = codec::block_digest(parent.hash, proposer, &txs);
        Block { parent: parent.hash, height: parent.height + 1, proposer, txs, hash }
    }

    pub fn genesis() -> Self {
        Block {
            parent: BlockHash::GENESIS,
            height: 0,
            proposer: ProcessId::miner(0),
            txs: Vec::new(),
            hash: BlockHash::GENESIS,
        }
    }
}

/// Ground-truth event log entry. Events within a run are totally
/// ordered by (round, seq); the engine stamps every field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub round: u64,
    pub seq: u64,
    pub process: ProcessId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// A message left the sender's queue. `instance` tags protocol
    /// messages with the broadcast instance they belong to.
    Send {
        message: MessageId,
        instance: Option<MessageId>,
    },
    /// A message was handed to a destination process.
    Deliver { message: MessageId, from: ProcessId },
    /// Reliable-broadcast delivery of an instance at this process.
    BrDeliver { instance: MessageId },
    /// Causal-broadcast delivery: the transaction entered this
    /// process's memory pool. `instance` identifies the carrying
    /// broadcast.
    BcDeliver { txid: TxId, instance: MessageId },
    /// A block was committed to this process's local tree.
    BlockCommit { block: BlockHash },
}
