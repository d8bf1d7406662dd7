//! Front-running adversaries. An attacker is a miner whose behavior is
//! swapped in through the engine's Byzantine hook: it follows the
//! protocol but watches its own mempool for a victim transaction and
//! injects transactions of its own the moment the victim's content
//! becomes readable. On the plaintext baseline that is the instant the
//! victim transaction arrives; on the causal chain it is only after the
//! ciphertext has already been causally delivered everywhere.

use crate::chain::ConsensusKind;
use crate::core::{
    BlockTree, EventKind, ProcessId, TraceEvent, Transaction, TxId,
};
use crate::node::{Client, Miner};
use crate::protocol::Payload;
use crate::rounds::{Behavior, Ctx, Destination, Envelope, Mailbox};
use crate::tcrypto::PublicKey;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// re-submit the victim's payload with a higher fee, aiming to be
    /// recorded first
    Displacement,
    /// bracket the victim: one high-fee transaction before it, one
    /// just-below-fee transaction after it
    Sandwich,
    /// crowd the victim out of full blocks with high-fee fillers
    Suppression,
}

fn default_fillers() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// index of the miner that turns Byzantine
    pub attacker: u32,
    pub victim_client: u32,
    pub victim_nonce: u64,
    pub fee_multiplier: u64,
    /// suppression only: how many filler transactions to inject
    #[serde(default = "default_fillers")]
    pub fillers: usize,
}

impl AttackConfig {
    pub fn attacker_id(&self) -> ProcessId {
        ProcessId::miner(self.attacker)
    }

    pub fn victim_id(&self) -> ProcessId {
        ProcessId::client(self.victim_client)
    }
}

/// The transactions the attacker injects on seeing `victim`. Pure, so a
/// post-run report can recompute them from the scenario alone.
pub fn injected_txs(cfg: &AttackConfig, victim: &Transaction) -> Vec<Transaction> {
    let attacker = cfg.attacker_id();
    let boosted = victim.fee.saturating_mul(cfg.fee_multiplier);
    match cfg.kind {
        AttackKind::Displacement => {
            vec![Transaction::new(attacker, 0, victim.payload.clone(), boosted)]
        }
        AttackKind::Sandwich => vec![
            Transaction::new(attacker, 0, [victim.payload.as_slice(), b":pre"].concat(), boosted),
            Transaction::new(
                attacker,
                1,
                [victim.payload.as_slice(), b":post"].concat(),
                victim.fee.saturating_sub(1),
            ),
        ],
        // decreasing fees keep the fillers' recorded order aligned with
        // their injection order under both chain rules
        AttackKind::Suppression => (0..cfg.fillers)
            .map(|i| {
                Transaction::new(
                    attacker,
                    i as u64,
                    format!("filler-{i}").into_bytes(),
                    boosted.saturating_sub(i as u64),
                )
            })
            .collect(),
    }
}

/// Protocol-following miner that additionally mounts one attack.
pub struct AttackerMiner {
    pub inner: Miner,
    cfg: AttackConfig,
    pk: PublicKey,
    scanned: usize,
    injected: bool,
    pending: Vec<Transaction>,
}

impl AttackerMiner {
    pub fn new(inner: Miner, cfg: AttackConfig, pk: PublicKey) -> Self {
        assert_eq!(inner.id, cfg.attacker_id());
        AttackerMiner { inner, cfg, pk, scanned: 0, injected: false, pending: Vec::new() }
    }

    /// Watch causal deliveries for the victim transaction; the attack
    /// cannot trigger earlier than the attacker can read the payload.
    fn scan_deliveries(&mut self) {
        for d in &self.inner.delivered_log[self.scanned..] {
            let tx = &d.entry.tx;
            if !self.injected
                && tx.client == self.cfg.victim_id()
                && tx.nonce == self.cfg.victim_nonce
            {
                self.pending = injected_txs(&self.cfg, tx);
                self.injected = true;
            }
        }
        self.scanned = self.inner.delivered_log.len();
    }
}

impl Behavior<Payload> for AttackerMiner {
    fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>) {
        self.inner.on_round_start(ctx, mail);
        for tx in self.pending.drain(..) {
            let instance = Client::instance_for(self.inner.id, tx.nonce);
            let payload = match self.inner.cfg.consensus {
                ConsensusKind::RoundRobinStrong => {
                    crate::bcb::bc_broadcast(&self.pk, &tx, &instance, ctx.rng)
                }
                ConsensusKind::FeePriorityBaseline => {
                    Payload::PlainTx { instance: instance.clone(), tx }
                }
            };
            mail.send(Destination::Miners, payload, Some(instance));
        }
    }

    fn on_deliver(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>, env: &Envelope<Payload>) {
        self.inner.on_deliver(ctx, mail, env);
        self.scan_deliveries();
    }

    fn on_round_end(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>) {
        self.inner.on_round_end(ctx, mail);
    }

    fn chain(&self) -> Option<&BlockTree> {
        self.inner.chain()
    }

    fn mempool_digest(&self) -> Option<[u8; 32]> {
        self.inner.mempool_digest()
    }
}

/// Post-run verdict on one attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub kind: AttackKind,
    pub success: bool,
    pub victim_recorded: bool,
}

/// Judge the attack from the trace and the agreed chain. `victim_tx`
/// is recomputed from the scenario script, never read from attacker
/// state.
pub fn evaluate(
    cfg: &AttackConfig,
    victim_tx: &Transaction,
    block_limit: usize,
    trace: &[TraceEvent],
    tree: &BlockTree,
) -> AttackOutcome {
    let verdict = |success, victim_recorded| AttackOutcome {
        kind: cfg.kind,
        success,
        victim_recorded,
    };
    let Some(chain) = tree.consensus_chain() else {
        return verdict(false, false);
    };
    let mut pos: BTreeMap<TxId, (usize, usize)> = BTreeMap::new();
    for (bi, block) in chain.iter().enumerate() {
        for (ti, tx) in block.txs.iter().enumerate() {
            pos.insert(tx.txid, (bi, ti));
        }
    }
    let victim_pos = pos.get(&victim_tx.txid).copied();
    let injected = injected_txs(cfg, victim_tx);
    match cfg.kind {
        AttackKind::Displacement => {
            let success = match (victim_pos, pos.get(&injected[0].txid)) {
                (Some(v), Some(a)) => a < &v,
                _ => false,
            };
            verdict(success, victim_pos.is_some())
        }
        AttackKind::Sandwich => {
            let pre = pos.get(&injected[0].txid);
            let post = pos.get(&injected[1].txid);
            let success = matches!(
                (pre, victim_pos.as_ref(), post),
                (Some(a), Some(v), Some(b)) if a < v && v < b
            );
            verdict(success, victim_pos.is_some())
        }
        AttackKind::Suppression => {
            // first BC_deliver of the victim anywhere is its arrival
            let arrival = trace.iter().find_map(|ev| match &ev.kind {
                EventKind::BcDeliver { txid, .. } if *txid == victim_tx.txid => Some(ev.round),
                _ => None,
            });
            let Some(arrival) = arrival else {
                return verdict(false, victim_pos.is_some());
            };
            let mut commit_round = BTreeMap::new();
            for ev in trace {
                if let EventKind::BlockCommit { block } = &ev.kind {
                    commit_round.entry(*block).or_insert(ev.round);
                }
            }
            // the victim loses if it is still unrecorded when the first
            // post-arrival full block lands
            let full = chain.iter().enumerate().find(|(_, b)| {
                b.txs.len() >= block_limit
                    && commit_round.get(&b.hash).is_some_and(|r| *r >= arrival)
            });
            let success = match (full, victim_pos) {
                (Some((bi, _)), Some((vb, _))) => vb > bi,
                (Some(_), None) => true,
                _ => false,
            };
            verdict(success, victim_pos.is_some())
        }
    }
}
