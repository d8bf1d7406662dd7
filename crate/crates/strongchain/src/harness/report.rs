//! Post-run analysis: one `RunReport` summarising consistency,
//! causal-order safety, broadcast latency and complexity, fairness,
//! and the attack verdict. A pure function of the run output.

use super::detect::{detect_violations, Violation};
use super::RunOutput;
use crate::adversary::{self, AttackOutcome};
use crate::brb;
use crate::chain::{slot_of_round, ConsensusKind};
use crate::core::{EventKind, MessageId, ProcessId, TxId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrbStats {
    pub instance: MessageId,
    /// rounds from broadcast to the first reliable delivery, inclusive
    pub gamma_obs: u64,
    /// rounds from broadcast to the last reliable delivery, inclusive
    pub beta_obs: u64,
    /// correct runs keep all deliveries within twice the fastest
    pub dispersion_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LivenessStats {
    pub instance: MessageId,
    pub txid: TxId,
    pub broadcast_round: u64,
    /// slowest causal delivery among correct miners
    pub deliver_round: u64,
    pub from_client: bool,
    /// deliver_round <= broadcast + beta_obs + 1
    pub within_beta_bound: bool,
    /// deliver_round <= broadcast + 4 (correct submitters)
    pub within_worst_bound: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceMessages {
    pub instance: MessageId,
    /// point-to-point envelopes spent on this broadcast instance
    pub envelopes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub consensus: ConsensusKind,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    /// every correct miner held an identical mempool at every round end
    pub digests_consistent: bool,
    pub violations: Vec<Violation>,
    /// recorded order never inverts mempool causal order
    pub strong_blockchain: bool,
    pub brb: Vec<BrbStats>,
    pub liveness: Vec<LivenessStats>,
    pub messages: Vec<InstanceMessages>,
    pub attack: Option<AttackOutcome>,
    pub committed_blocks: usize,
    pub recorded_txs: usize,
    pub pending_txs: usize,
    pub max_mempool_size: usize,
    pub max_age_slots: u64,
    pub fairness_bound_slots: u64,
    pub fairness_ok: bool,
}

impl RunReport {
    /// Invariants a finished run must always satisfy; attack verdicts
    /// are findings, not failures.
    pub fn invariants_ok(&self) -> bool {
        let causal = self.consensus != ConsensusKind::RoundRobinStrong
            || (self.violations.is_empty()
                && self.strong_blockchain
                && self.brb.iter().all(|b| b.dispersion_ok)
                && self
                    .liveness
                    .iter()
                    .all(|l| l.within_beta_bound && (!l.from_client || l.within_worst_bound)));
        self.digests_consistent && self.fairness_ok && causal
    }
}

pub fn analyze(out: &RunOutput) -> anyhow::Result<RunReport> {
    let sc = &out.scenario;
    let trace = &out.trace;

    let digests_consistent = {
        let mut values = out.round_digests.values();
        match values.next() {
            Some(first) => values.all(|d| d == first),
            None => false,
        }
    };

    // reference view: the first correct miner
    let reference = *out.round_digests.keys().next().unwrap_or(&ProcessId::miner(1));
    let mut deliver_ref: BTreeMap<TxId, u64> = BTreeMap::new();
    let mut deliver_max: BTreeMap<TxId, u64> = BTreeMap::new();
    let mut commit_round: BTreeMap<crate::core::BlockHash, u64> = BTreeMap::new();
    let mut instance_tx: BTreeMap<MessageId, TxId> = BTreeMap::new();
    let mut broadcast_round: BTreeMap<MessageId, u64> = BTreeMap::new();
    let mut envelopes: BTreeMap<MessageId, usize> = BTreeMap::new();
    let mut send_instance: BTreeMap<MessageId, MessageId> = BTreeMap::new();
    let correct_miner =
        |p: &ProcessId| p.is_miner() && !out.byzantine.contains(p);
    for ev in trace {
        match &ev.kind {
            EventKind::Send { message, instance: Some(inst) } => {
                if ev.process == inst.sender {
                    broadcast_round.entry(inst.clone()).or_insert(ev.round);
                }
                send_instance.insert(message.clone(), inst.clone());
            }
            EventKind::Deliver { message, .. } => {
                if let Some(inst) = send_instance.get(message) {
                    *envelopes.entry(inst.clone()).or_insert(0) += 1;
                }
            }
            EventKind::BcDeliver { txid, instance } if correct_miner(&ev.process) => {
                instance_tx.entry(instance.clone()).or_insert(*txid);
                if ev.process == reference {
                    deliver_ref.entry(*txid).or_insert(ev.round);
                }
                let r = deliver_max.entry(*txid).or_insert(ev.round);
                *r = (*r).max(ev.round);
            }
            EventKind::BlockCommit { block } if ev.process == reference => {
                commit_round.entry(*block).or_insert(ev.round);
            }
            _ => {}
        }
    }

    let violations = detect_violations(trace, &out.tree)?;

    let chain = out.tree.consensus_chain().unwrap_or_default();
    let mut positions: BTreeMap<TxId, (usize, usize)> = BTreeMap::new();
    let mut tx_commit_round: BTreeMap<TxId, u64> = BTreeMap::new();
    for (bi, block) in chain.iter().enumerate() {
        for (ti, tx) in block.txs.iter().enumerate() {
            positions.insert(tx.txid, (bi, ti));
            if let Some(r) = commit_round.get(&block.hash) {
                tx_commit_round.insert(tx.txid, *r);
            }
        }
    }

    // causal order on the reference mempool is delivery-round order;
    // the chain must never invert it
    let strong_blockchain = positions.iter().all(|(tx, pos)| {
        positions.iter().all(|(other, other_pos)| {
            match (deliver_ref.get(tx), deliver_ref.get(other)) {
                (Some(a), Some(b)) if a < b => pos < other_pos,
                _ => true,
            }
        })
    });

    let mut brb_stats = Vec::new();
    let mut liveness = Vec::new();
    for (inst, txid) in &instance_tx {
        let Some(&bcast) = broadcast_round.get(inst) else { continue };
        let deliver_round = deliver_max[txid];
        let lat = brb::measured_latency(trace, inst);
        if let Some((gamma, beta)) = lat {
            brb_stats.push(BrbStats {
                instance: inst.clone(),
                gamma_obs: gamma,
                beta_obs: beta,
                dispersion_ok: beta < 2 * gamma,
            });
        }
        let beta = lat.map(|(_, b)| b).unwrap_or(0);
        let from_client = !inst.sender.is_miner();
        liveness.push(LivenessStats {
            instance: inst.clone(),
            txid: *txid,
            broadcast_round: bcast,
            deliver_round,
            from_client,
            within_beta_bound: sc.consensus != ConsensusKind::RoundRobinStrong
                || deliver_round <= bcast + beta + 1,
            within_worst_bound: deliver_round <= bcast + 4,
        });
    }

    let messages = envelopes
        .into_iter()
        .map(|(instance, envelopes)| InstanceMessages { instance, envelopes })
        .collect();

    // mempool occupancy and age at the reference miner, in slots
    let mut max_mempool_size = 0usize;
    for round in 0..sc.rounds {
        let delivered = deliver_ref.values().filter(|r| **r <= round).count();
        let recorded = tx_commit_round.values().filter(|r| **r <= round).count();
        max_mempool_size = max_mempool_size.max(delivered.saturating_sub(recorded));
    }
    let mut max_age_slots = 0u64;
    for (txid, commit) in &tx_commit_round {
        if let Some(delivered) = deliver_ref.get(txid) {
            max_age_slots =
                max_age_slots.max(slot_of_round(*commit).saturating_sub(slot_of_round(*delivered)));
        }
    }
    let limit = sc.block_limit.max(1);
    let fairness_bound_slots =
        (sc.n * max_mempool_size.div_ceil(limit) + sc.n) as u64;
    let fairness_ok = max_age_slots <= fairness_bound_slots;

    let attack = match (&sc.attack, sc.victim_tx()) {
        (Some(cfg), Some(victim)) => {
            Some(adversary::evaluate(cfg, &victim, sc.block_limit, trace, &out.tree))
        }
        _ => None,
    };

    let recorded_txs = positions.len();
    let pending_txs = {
        let ids: BTreeSet<&TxId> = deliver_ref.keys().collect();
        ids.iter().filter(|t| !positions.contains_key(**t)).count()
    };

    Ok(RunReport {
        scenario: sc.name.clone(),
        consensus: sc.consensus,
        n: sc.n,
        t: sc.t,
        seed: sc.seed,
        digests_consistent,
        violations,
        strong_blockchain,
        brb: brb_stats,
        liveness,
        messages,
        attack,
        committed_blocks: chain.len().saturating_sub(1),
        recorded_txs,
        pending_txs,
        max_mempool_size,
        max_age_slots,
        fairness_bound_slots,
        fairness_ok,
    })
}
