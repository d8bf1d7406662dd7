//! Chain rules: which transactions may enter a block, greedy block
//! assembly, leader rotation, and vote tallying for the round-robin
//! commit rule.

use crate::core::{Block, BlockHash, BlockTree, MempoolEntry, ProcessId, TxId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusKind {
    /// causal-order-preserving chain: encrypted mempool, safe blocks
    RoundRobinStrong,
    /// plaintext mempool ordered by fee, no causal gate
    FeePriorityBaseline,
}

/// A transaction is safe to record once every member of its causal
/// past is already on the chain or scheduled earlier in the same
/// block.
pub fn is_safe_transaction(
    entry: &MempoolEntry,
    recorded: &BTreeSet<TxId>,
    earlier_in_block: &BTreeSet<TxId>,
) -> bool {
    entry
        .causal_past
        .iter()
        .all(|dep| recorded.contains(dep) || earlier_in_block.contains(dep))
}

/// A block is safe when each of its transactions is safe given the
/// chain below it plus the block's own prefix.
pub fn is_safe_block(
    block: &Block,
    mempool: &BTreeMap<TxId, MempoolEntry>,
    recorded_below: &BTreeSet<TxId>,
) -> bool {
    let mut prefix = BTreeSet::new();
    for tx in &block.txs {
        let Some(entry) = mempool.get(&tx.txid) else {
            return false; // unknown to our mempool: cannot vouch for it
        };
        if !is_safe_transaction(entry, recorded_below, &prefix) {
            return false;
        }
        prefix.insert(tx.txid);
    }
    true
}

/// Greedy safe-block assembly: oldest deliveries first, ties broken by
/// fee (descending) then txid. A single pass suffices because every
/// causal-past member of an entry was delivered in a strictly earlier
/// round, so it is visited first.
pub fn propose_block_strong(
    tree: &BlockTree,
    parent: BlockHash,
    proposer: ProcessId,
    mempool: &BTreeMap<TxId, MempoolEntry>,
    recorded: &BTreeSet<TxId>,
    limit: usize,
) -> Block {
    let mut order: Vec<&MempoolEntry> = mempool.values().collect();
    order.sort_by(|a, b| {
        a.delivery_round
            .cmp(&b.delivery_round)
            .then(b.tx.fee.cmp(&a.tx.fee))
            .then(a.tx.txid.cmp(&b.tx.txid))
    });
    let mut chosen = Vec::new();
    let mut prefix = BTreeSet::new();
    for entry in order {
        if chosen.len() == limit {
            break;
        }
        if is_safe_transaction(entry, recorded, &prefix) {
            prefix.insert(entry.tx.txid);
            chosen.push(entry.tx.clone());
        }
    }
    let parent_block = tree.get(&parent).expect("parent in tree");
    Block::build(parent_block, proposer, chosen)
}

/// Fee-priority assembly: highest fee first, no causal constraint.
pub fn propose_block_baseline(
    tree: &BlockTree,
    parent: BlockHash,
    proposer: ProcessId,
    mempool: &BTreeMap<TxId, MempoolEntry>,
    limit: usize,
) -> Block {
    let mut order: Vec<&MempoolEntry> = mempool.values().collect();
    order.sort_by(|a, b| b.tx.fee.cmp(&a.tx.fee).then(a.tx.txid.cmp(&b.tx.txid)));
    let txs = order.into_iter().take(limit).map(|e| e.tx.clone()).collect();
    let parent_block = tree.get(&parent).expect("parent in tree");
    Block::build(parent_block, proposer, txs)
}

/// Rotating leader: slot s is proposed by miner 1 + (s mod n).
pub fn slot_leader(slot: u64, n: usize) -> ProcessId {
    ProcessId::miner(1 + (slot % n as u64) as u32)
}

/// Each slot spans two rounds: proposals in the even round, votes in
/// the odd round, commit at the odd round's end.
pub const ROUNDS_PER_SLOT: u64 = 2;

pub fn slot_of_round(round: u64) -> u64 {
    round / ROUNDS_PER_SLOT
}

pub fn is_proposal_round(round: u64) -> bool {
    round.is_multiple_of(ROUNDS_PER_SLOT)
}

/// Vote bookkeeping for one slot. Counts at most one vote per miner;
/// accept votes carry the proposed block so a quorum can commit even
/// when the proposer withheld the proposal from some miners.
#[derive(Debug, Default)]
pub struct SlotTally {
    accepts: BTreeMap<ProcessId, Block>,
    rejects: BTreeSet<ProcessId>,
}

impl SlotTally {
    pub fn record(&mut self, voter: ProcessId, accept: bool, block: Option<Block>) {
        if self.accepts.contains_key(&voter) || self.rejects.contains(&voter) {
            return;
        }
        match (accept, block) {
            (true, Some(b)) => {
                self.accepts.insert(voter, b);
            }
            (false, _) => {
                self.rejects.insert(voter);
            }
            (true, None) => {} // malformed accept: ignore
        }
    }

    /// Commit when 2t+1 miners accepted the same block hash. Two
    /// distinct quorums are impossible since 2(2t+1) > 3t+1.
    pub fn committed(&self, quorum: usize) -> Option<&Block> {
        let mut counts: BTreeMap<BlockHash, (usize, &Block)> = BTreeMap::new();
        for b in self.accepts.values() {
            counts.entry(b.hash).or_insert((0, b)).0 += 1;
        }
        counts.values().find(|(c, _)| *c >= quorum).map(|(_, b)| *b)
    }
}
