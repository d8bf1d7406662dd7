//! Process behaviors: the miner (strong causal or fee-priority
//! baseline) and the scripted client.

use crate::bcb::{self, BcDelivery, BcbMinerState};
use crate::brb::{BrbConfig, BrbMiner};
use crate::chain::{
    self, is_proposal_round, slot_leader, slot_of_round, ConsensusKind, SlotTally,
    ROUNDS_PER_SLOT,
};
use crate::core::{Block, BlockHash, BlockTree, MessageId, ProcessId, Transaction};
use crate::protocol::Payload;
use crate::rounds::{Behavior, Ctx, Destination, Envelope, Mailbox};
use crate::tcrypto::{PublicKey, SecretShare, VerificationKey};
use std::collections::{BTreeMap, BTreeSet};

/// The broadcast instance a payload serves, for trace attribution.
/// Consensus traffic is not instance-bound.
pub fn payload_instance(p: &Payload) -> Option<MessageId> {
    match p {
        Payload::BrbInit { instance, .. }
        | Payload::BrbEcho { instance, .. }
        | Payload::BrbReady { instance, .. }
        | Payload::Share { instance, .. }
        | Payload::PlainTx { instance, .. } => Some(instance.clone()),
        Payload::Proposal { .. } | Payload::Vote { .. } => None,
    }
}

#[derive(Debug, Clone)]
pub struct MinerConfig {
    pub n: usize,
    pub t: usize,
    pub block_limit: usize,
    pub consensus: ConsensusKind,
}

impl MinerConfig {
    pub fn quorum(&self) -> usize {
        2 * self.t + 1
    }
}

/// A miner: relays reliable-broadcast phases, maintains the encrypted
/// (or plaintext) mempool, and takes part in rotating-leader consensus.
pub struct Miner {
    pub id: ProcessId,
    /// 1-based key-share holder index
    pub holder: usize,
    pub cfg: MinerConfig,
    pub brb: BrbMiner,
    pub bcb: BcbMinerState,
    secret: SecretShare,
    vk: VerificationKey,
    pub tree: BlockTree,
    pub tip: BlockHash,
    tallies: BTreeMap<u64, SlotTally>,
    voted: BTreeSet<u64>,
    /// causal deliveries in order, for wrappers that watch the mempool
    pub delivered_log: Vec<BcDelivery>,
    digests: Vec<(u64, [u8; 32])>,
}

impl Miner {
    pub fn new(id: ProcessId, cfg: MinerConfig, secret: SecretShare, vk: VerificationKey) -> Self {
        assert!(id.is_miner());
        let tree = BlockTree::new();
        let tip = tree.genesis();
        Miner {
            holder: id.index as usize,
            brb: BrbMiner::new(BrbConfig::new(cfg.n, cfg.t)),
            bcb: BcbMinerState::new(cfg.t),
            id,
            cfg,
            secret,
            vk,
            tree,
            tip,
            tallies: BTreeMap::new(),
            voted: BTreeSet::new(),
            delivered_log: Vec::new(),
            digests: Vec::new(),
        }
    }

    fn strong(&self) -> bool {
        self.cfg.consensus == ConsensusKind::RoundRobinStrong
    }

    fn note_delivery(&mut self, ctx: &mut Ctx<'_>, d: BcDelivery) {
        ctx.note_bc_deliver(d.entry.tx.txid, d.instance.clone());
        self.delivered_log.push(d);
    }

    /// Is this block one we would vote to append right now?
    fn acceptable(&self, slot: u64, block: &Block) -> bool {
        let Some(parent) = self.tree.get(&block.parent) else { return false };
        if block.parent != self.tip
            || block.txs.is_empty()
            || *block != Block::build(parent, block.proposer, block.txs.clone())
            || block.proposer != slot_leader(slot, self.cfg.n)
        {
            return false;
        }
        let mut seen = BTreeSet::new();
        for tx in &block.txs {
            if self.bcb.recorded.contains(&tx.txid) || !seen.insert(tx.txid) {
                return false;
            }
            if !self.bcb.mempool.contains_key(&tx.txid) {
                return false;
            }
        }
        match self.cfg.consensus {
            ConsensusKind::RoundRobinStrong => {
                chain::is_safe_block(block, &self.bcb.mempool, &self.bcb.recorded)
            }
            ConsensusKind::FeePriorityBaseline => true,
        }
    }

    fn propose(&self, mail: &mut Mailbox<Payload>, slot: u64) {
        let block = match self.cfg.consensus {
            ConsensusKind::RoundRobinStrong => chain::propose_block_strong(
                &self.tree,
                self.tip,
                self.id,
                &self.bcb.mempool,
                &self.bcb.recorded,
                self.cfg.block_limit,
            ),
            ConsensusKind::FeePriorityBaseline => chain::propose_block_baseline(
                &self.tree,
                self.tip,
                self.id,
                &self.bcb.mempool,
                self.cfg.block_limit,
            ),
        };
        if !block.txs.is_empty() {
            mail.send(Destination::All, Payload::Proposal { slot, block }, None);
        }
    }

    fn try_commit(&mut self, ctx: &mut Ctx<'_>, slot: u64) {
        let quorum = self.cfg.quorum();
        let Some(block) = self.tallies.get(&slot).and_then(|t| t.committed(quorum)).cloned()
        else {
            return;
        };
        // a quorum implies at least t+1 correct accepts, so this must
        // succeed at every correct miner; a failure can only mean our
        // own state diverged
        if self.tree.insert(block.clone()).is_err() {
            return;
        }
        self.tip = block.hash;
        self.bcb.mark_recorded(block.txs.iter().map(|tx| tx.txid));
        ctx.note_block_commit(block.hash);
        self.tallies.remove(&slot);
    }
}

impl Behavior<Payload> for Miner {
    fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>) {
        self.bcb.snapshot_round_start();
        if is_proposal_round(ctx.round) {
            let slot = slot_of_round(ctx.round);
            if slot_leader(slot, self.cfg.n) == self.id {
                self.propose(mail, slot);
            }
        }
    }

    fn on_deliver(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>, env: &Envelope<Payload>) {
        match &env.payload {
            Payload::BrbInit { .. } | Payload::BrbEcho { .. } | Payload::BrbReady { .. } => {
                if !self.strong() {
                    return;
                }
                // quorum thresholds count miners; only the initial send
                // may come from outside the miner set
                if !env.from.is_miner() && !matches!(env.payload, Payload::BrbInit { .. }) {
                    return;
                }
                let (sends, delivered) = self.brb.on_envelope(env.from, &env.payload);
                for p in sends {
                    let inst = payload_instance(&p);
                    mail.send(Destination::Miners, p, inst);
                }
                if let Some((instance, body)) = delivered {
                    ctx.note_br_deliver(instance.clone());
                    if let Some(share) =
                        self.bcb.on_br_deliver(&self.secret, self.holder, &instance, &body)
                    {
                        mail.send(Destination::Miners, share, Some(instance));
                    }
                }
            }
            Payload::Share { instance, share } => {
                if !self.strong() {
                    return;
                }
                if let Some(d) = self.bcb.on_share(&self.vk, instance, share, ctx.round) {
                    self.note_delivery(ctx, d);
                }
            }
            Payload::PlainTx { instance, tx } => {
                if self.strong() {
                    return;
                }
                if let Some(d) = self.bcb.install_plain(tx.clone(), instance.clone(), ctx.round) {
                    self.note_delivery(ctx, d);
                }
            }
            Payload::Proposal { slot, block } => {
                if !env.from.is_miner()
                    || *slot != slot_of_round(ctx.round)
                    || !is_proposal_round(ctx.round)
                    || env.from != slot_leader(*slot, self.cfg.n)
                    || !self.voted.insert(*slot)
                {
                    return;
                }
                let accept = self.acceptable(*slot, block);
                mail.send(
                    Destination::All,
                    Payload::Vote {
                        slot: *slot,
                        block_hash: block.hash,
                        accept,
                        block: accept.then(|| block.clone()),
                    },
                    None,
                );
            }
            Payload::Vote { slot, accept, block, .. } => {
                if !env.from.is_miner() {
                    return;
                }
                self.tallies.entry(*slot).or_default().record(env.from, *accept, block.clone());
            }
        }
    }

    fn on_round_end(&mut self, ctx: &mut Ctx<'_>, _mail: &mut Mailbox<Payload>) {
        if ctx.round % ROUNDS_PER_SLOT == ROUNDS_PER_SLOT - 1 {
            self.try_commit(ctx, slot_of_round(ctx.round));
        }
        self.digests.push((ctx.round, self.bcb.mempool_digest()));
    }

    fn chain(&self) -> Option<&BlockTree> {
        Some(&self.tree)
    }

    fn mempool_digest(&self) -> Option<[u8; 32]> {
        Some(self.bcb.mempool_digest())
    }

    fn round_digests(&self) -> Option<&[(u64, [u8; 32])]> {
        Some(&self.digests)
    }
}

/// A client that submits scripted transactions at fixed rounds.
/// Strong-mode submissions are threshold-encrypted and reliably
/// broadcast; baseline submissions go out in plaintext.
pub struct Client {
    pub id: ProcessId,
    pk: PublicKey,
    consensus: ConsensusKind,
    script: BTreeMap<u64, Vec<Transaction>>,
}

impl Client {
    pub fn new(id: ProcessId, pk: PublicKey, consensus: ConsensusKind) -> Self {
        assert!(!id.is_miner());
        Client { id, pk, consensus, script: BTreeMap::new() }
    }

    pub fn schedule(&mut self, round: u64, tx: Transaction) {
        self.script.entry(round).or_default().push(tx);
    }

    /// The broadcast instance id for a submission: the submitter plus
    /// the transaction nonce, which the submitter keeps unique.
    pub fn instance_for(sender: ProcessId, nonce: u64) -> MessageId {
        MessageId::new(sender, nonce.to_be_bytes().to_vec())
    }
}

impl Behavior<Payload> for Client {
    fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>) {
        let Some(txs) = self.script.remove(&ctx.round) else { return };
        for tx in txs {
            let instance = Client::instance_for(self.id, tx.nonce);
            let payload = match self.consensus {
                ConsensusKind::RoundRobinStrong => {
                    bcb::bc_broadcast(&self.pk, &tx, &instance, ctx.rng)
                }
                ConsensusKind::FeePriorityBaseline => Payload::PlainTx { instance: instance.clone(), tx },
            };
            mail.send(Destination::Miners, payload, Some(instance));
        }
    }
}
