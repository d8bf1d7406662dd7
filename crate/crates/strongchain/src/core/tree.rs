//! Block tree with the unique-deepest-leaf consensus chain rule.

use super::{Block, BlockHash, TxId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("parent block {0} not present in tree")]
    MissingParent(BlockHash),
    #[error("block {0} already present")]
    DuplicateBlock(BlockHash),
    #[error("block height {got} does not extend parent height {parent}")]
    BadHeight { parent: u64, got: u64 },
    #[error("transaction {0} duplicated within block or ancestry")]
    DuplicateTx(TxId),
    #[error("tree has no unique consensus chain")]
    NoConsensusChain,
}

/// Tree of blocks rooted at genesis. Every non-genesis block's parent
/// exists in the map; insertion enforces tree shape and txid
/// uniqueness along the ancestor path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockTree {
    blocks: BTreeMap<BlockHash, Block>,
    genesis: BlockHash,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        let genesis = Block::genesis();
        let mut blocks = BTreeMap::new();
        let root = genesis.hash;
        blocks.insert(root, genesis);
        BlockTree { blocks, genesis: root }
    }

    pub fn genesis(&self) -> BlockHash {
        self.genesis
    }

    pub fn get(&self, hash: &BlockHash) -> Option<&Block> {
        self.blocks.get(hash)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false // genesis is always present
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    pub fn insert(&mut self, block: Block) -> Result<(), TreeError> {
        if self.blocks.contains_key(&block.hash) {
            return Err(TreeError::DuplicateBlock(block.hash));
        }
        let parent = self
            .blocks
            .get(&block.parent)
            .ok_or(TreeError::MissingParent(block.parent))?;
        if block.height != parent.height + 1 {
            return Err(TreeError::BadHeight { parent: parent.height, got: block.height });
        }
        let mut seen: BTreeSet<TxId> = BTreeSet::new();
        for tx in &block.txs {
            if !seen.insert(tx.txid) {
                return Err(TreeError::DuplicateTx(tx.txid));
            }
        }
        let mut cursor = block.parent;
        loop {
            let b = &self.blocks[&cursor];
            for tx in &b.txs {
                if seen.contains(&tx.txid) {
                    return Err(TreeError::DuplicateTx(tx.txid));
                }
            }
            if cursor == self.genesis {
                break;
            }
            cursor = b.parent;
        }
        self.blocks.insert(block.hash, block);
        Ok(())
    }

    /// Root-to-deepest-leaf path when exactly one leaf attains maximal
    /// depth; `None` when two or more leaves tie (the tree is not a
    /// valid blockchain).
    pub fn consensus_chain(&self) -> Option<Vec<&Block>> {
        let with_children: BTreeSet<BlockHash> = self
            .blocks
            .values()
            .filter(|b| b.hash != self.genesis)
            .map(|b| b.parent)
            .collect();
        let leaves: Vec<&Block> =
            self.blocks.values().filter(|b| !with_children.contains(&b.hash)).collect();
        let max_depth = leaves.iter().map(|b| b.height).max()?;
        let deepest: Vec<&Block> = leaves.into_iter().filter(|b| b.height == max_depth).collect();
        if deepest.len() != 1 {
            return None;
        }
        let mut path = Vec::with_capacity(max_depth as usize + 1);
        let mut cursor = deepest[0];
        loop {
            path.push(cursor);
            if cursor.hash == self.genesis {
                break;
            }
            cursor = &self.blocks[&cursor.parent];
        }
        path.reverse();
        Some(path)
    }

    /// Lexicographic position of a recorded transaction in the chain's
    /// total order: (block index in chain, index within block).
    /// `Ok(None)` when the tree is valid but the txid is not recorded.
    pub fn recorded_position(&self, txid: &TxId) -> Result<Option<(usize, usize)>, TreeError> {
        let chain = self.consensus_chain().ok_or(TreeError::NoConsensusChain)?;
        for (bi, block) in chain.iter().enumerate() {
            for (ti, tx) in block.txs.iter().enumerate() {
                if tx.txid == *txid {
                    return Ok(Some((bi, ti)));
                }
            }
        }
        Ok(None)
    }

    /// Set of txids recorded anywhere on the consensus chain.
    pub fn recorded_txids(&self) -> Result<BTreeSet<TxId>, TreeError> {
        let chain = self.consensus_chain().ok_or(TreeError::NoConsensusChain)?;
        Ok(chain.iter().flat_map(|b| b.txs.iter().map(|t| t.txid)).collect())
    }

    /// Depth of the tree (height of the deepest block).
    pub fn depth(&self) -> u64 {
        self.blocks.values().map(|b| b.height).max().unwrap_or(0)
    }
}
