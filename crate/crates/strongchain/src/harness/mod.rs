//! Scenario runner, causal-violation detector, run reports and seed
//! sweeps.

pub mod detect;
pub mod report;
pub mod scenario;
pub mod sweep;

use crate::adversary::AttackerMiner;
use crate::core::{BlockTree, ProcessId, TraceEvent};
use crate::node::{Client, Miner, MinerConfig};
use crate::protocol::Payload;
use crate::rounds::RoundEngine;
use crate::tcrypto;
use anyhow::Context;
use scenario::Scenario;
use std::collections::{BTreeMap, BTreeSet};

/// Everything a finished run leaves behind. The chain and digests come
/// from correct miners only; Byzantine miners may claim anything.
pub struct RunOutput {
    pub scenario: Scenario,
    pub trace: Vec<TraceEvent>,
    pub tree: BlockTree,
    pub byzantine: BTreeSet<ProcessId>,
    pub round_digests: BTreeMap<ProcessId, Vec<(u64, [u8; 32])>>,
}

/// Execute a scenario to completion. Deterministic in the scenario
/// (including its seed).
pub fn run_scenario(sc: &Scenario) -> anyhow::Result<RunOutput> {
    sc.validate().context("invalid scenario")?;
    let km = tcrypto::generate(sc.backend, sc.n, 2 * sc.t + 1, sc.seed)?;
    let mut eng: RoundEngine<Payload> = RoundEngine::new(sc.seed, sc.t);
    let cfg = MinerConfig {
        n: sc.n,
        t: sc.t,
        block_limit: sc.block_limit,
        consensus: sc.consensus,
    };
    for i in 1..=sc.n {
        let id = ProcessId::miner(i as u32);
        let miner = Miner::new(id, cfg.clone(), km.secret_for(i).clone(), km.verification.clone());
        eng.add_process(id, Box::new(miner))?;
    }
    for script in &sc.clients {
        let id = ProcessId::client(script.client);
        let mut client = Client::new(id, km.public.clone(), sc.consensus);
        for tx in &script.txs {
            client.schedule(tx.round, tx.build(id));
        }
        eng.add_process(id, Box::new(client))?;
    }
    if let Some(attack) = &sc.attack {
        let id = attack.attacker_id();
        let inner =
            Miner::new(id, cfg.clone(), km.secret_for(attack.attacker as usize).clone(), km.verification.clone());
        let strategy = AttackerMiner::new(inner, attack.clone(), km.public.clone());
        eng.byzantine_hook(id, Box::new(strategy))?;
    }
    eng.run(sc.rounds);

    let byzantine = eng.byzantine_miners().clone();
    let mut round_digests = BTreeMap::new();
    let mut tree = None;
    for i in 1..=sc.n {
        let id = ProcessId::miner(i as u32);
        if byzantine.contains(&id) {
            continue;
        }
        let b = eng.behavior(id).expect("miner registered");
        if let Some(d) = b.round_digests() {
            round_digests.insert(id, d.to_vec());
        }
        if tree.is_none() {
            tree = b.chain().cloned();
        }
    }
    Ok(RunOutput {
        scenario: sc.clone(),
        trace: eng.trace().to_vec(),
        tree: tree.context("no correct miner exposes a chain")?,
        byzantine,
        round_digests,
    })
}
