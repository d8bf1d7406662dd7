//! Declarative run descriptions, loadable from JSON, plus the bundled
//! corpus the CLI and tests share.

use crate::adversary::{AttackConfig, AttackKind};
use crate::chain::ConsensusKind;
use crate::core::{ProcessId, Transaction};
use crate::tcrypto::BackendKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedTx {
    pub round: u64,
    pub nonce: u64,
    pub payload: String,
    pub fee: u64,
}

impl ScriptedTx {
    pub fn build(&self, client: ProcessId) -> Transaction {
        Transaction::new(client, self.nonce, self.payload.clone().into_bytes(), self.fee)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientScript {
    pub client: u32,
    pub txs: Vec<ScriptedTx>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub rounds: u64,
    pub block_limit: usize,
    pub consensus: ConsensusKind,
    pub backend: BackendKind,
    pub clients: Vec<ClientScript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("n = {n} must equal 3t + 1 = {expected} for t = {t}")]
    BadQuorum { n: usize, t: usize, expected: usize },
    #[error("fault tolerance t must be at least 1")]
    ZeroT,
    #[error("attacker miner index {0} is out of range")]
    BadAttacker(u32),
    #[error("attack victim client {0} does not exist in the script")]
    UnknownVictim(u32),
    #[error("attack victim nonce {0} is never submitted by the victim")]
    UnknownVictimTx(u64),
    #[error("duplicate nonce {nonce} for client {client}")]
    DuplicateNonce { client: u32, nonce: u64 },
    #[error("client index 0 is reserved")]
    ZeroClient,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.t == 0 {
            return Err(ScenarioError::ZeroT);
        }
        let expected = 3 * self.t + 1;
        if self.n != expected {
            return Err(ScenarioError::BadQuorum { n: self.n, t: self.t, expected });
        }
        for script in &self.clients {
            if script.client == 0 {
                return Err(ScenarioError::ZeroClient);
            }
            let mut nonces = std::collections::BTreeSet::new();
            for tx in &script.txs {
                if !nonces.insert(tx.nonce) {
                    return Err(ScenarioError::DuplicateNonce {
                        client: script.client,
                        nonce: tx.nonce,
                    });
                }
            }
        }
        if let Some(attack) = &self.attack {
            if attack.attacker == 0 || attack.attacker as usize > self.n {
                return Err(ScenarioError::BadAttacker(attack.attacker));
            }
            let victim = self
                .clients
                .iter()
                .find(|c| c.client == attack.victim_client)
                .ok_or(ScenarioError::UnknownVictim(attack.victim_client))?;
            if !victim.txs.iter().any(|tx| tx.nonce == attack.victim_nonce) {
                return Err(ScenarioError::UnknownVictimTx(attack.victim_nonce));
            }
        }
        Ok(())
    }

    /// The scripted transaction an attack targets.
    pub fn victim_tx(&self) -> Option<Transaction> {
        let attack = self.attack.as_ref()?;
        let script = self.clients.iter().find(|c| c.client == attack.victim_client)?;
        let tx = script.txs.iter().find(|tx| tx.nonce == attack.victim_nonce)?;
        Some(tx.build(ProcessId::client(attack.victim_client)))
    }
}

fn base(name: &str, t: usize, consensus: ConsensusKind, seed: u64) -> Scenario {
    Scenario {
        name: name.to_string(),
        n: 3 * t + 1,
        t,
        seed,
        rounds: 40,
        block_limit: 4,
        consensus,
        backend: BackendKind::Mock,
        clients: Vec::new(),
        attack: None,
    }
}

fn steady_clients(count: u32, txs_each: u64, start: u64, spacing: u64) -> Vec<ClientScript> {
    (1..=count)
        .map(|c| ClientScript {
            client: c,
            txs: (0..txs_each)
                .map(|k| ScriptedTx {
                    round: start + spacing * k + (c as u64 - 1),
                    nonce: k,
                    payload: format!("c{c}-tx{k}"),
                    fee: 1 + ((c as u64 * 7 + k * 3) % 20),
                })
                .collect(),
        })
        .collect()
}

fn victim_script() -> ClientScript {
    ClientScript {
        client: 1,
        txs: vec![ScriptedTx { round: 2, nonce: 0, payload: "swap:amm:100".into(), fee: 10 }],
    }
}

fn attack_scenario(kind: AttackKind, t: usize, consensus: ConsensusKind) -> Scenario {
    let tag = match consensus {
        ConsensusKind::RoundRobinStrong => "strong",
        ConsensusKind::FeePriorityBaseline => "baseline",
    };
    let kind_tag = match kind {
        AttackKind::Displacement => "displacement",
        AttackKind::Sandwich => "sandwich",
        AttackKind::Suppression => "suppression",
    };
    let mut sc = base(&format!("{kind_tag}-{tag}-t{t}"), t, consensus, 1000 + t as u64);
    sc.block_limit = 2;
    sc.rounds = 48;
    sc.clients = vec![
        victim_script(),
        // background traffic so blocks can fill
        ClientScript {
            client: 2,
            txs: (0..4)
                .map(|k| ScriptedTx {
                    round: 14 + 4 * k,
                    nonce: k,
                    payload: format!("bg-{k}"),
                    fee: 2,
                })
                .collect(),
        },
    ];
    sc.attack = Some(AttackConfig {
        kind,
        attacker: 2,
        victim_client: 1,
        victim_nonce: 0,
        fee_multiplier: 5,
        fillers: 5,
    });
    sc
}

/// The corpus every entry point shares: clean runs on both chain rules
/// and every attack on both, at t = 1 and t = 2.
pub fn bundled() -> Vec<Scenario> {
    let mut out = Vec::new();
    for t in [1usize, 2] {
        for consensus in [ConsensusKind::RoundRobinStrong, ConsensusKind::FeePriorityBaseline] {
            let tag = match consensus {
                ConsensusKind::RoundRobinStrong => "strong",
                ConsensusKind::FeePriorityBaseline => "baseline",
            };
            let mut clean = base(&format!("clean-{tag}-t{t}"), t, consensus, 40 + t as u64);
            clean.clients = steady_clients(3, 4, 1, 5);
            clean.rounds = 60;
            out.push(clean);
            for kind in
                [AttackKind::Displacement, AttackKind::Sandwich, AttackKind::Suppression]
            {
                out.push(attack_scenario(kind, t, consensus));
            }
        }
    }
    let mut dlog = base("clean-strong-dlog-t1", 1, ConsensusKind::RoundRobinStrong, 77);
    dlog.backend = BackendKind::Dlog;
    dlog.clients = steady_clients(2, 2, 1, 6);
    out.push(dlog);
    out
}

pub fn bundled_by_name(name: &str) -> Option<Scenario> {
    bundled().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_all_validate_and_roundtrip() {
        let all = bundled();
        assert!(all.len() >= 13);
        let mut names = std::collections::BTreeSet::new();
        for sc in &all {
            sc.validate().unwrap();
            assert!(names.insert(sc.name.clone()), "duplicate scenario name {}", sc.name);
            let json = serde_json::to_string_pretty(sc).unwrap();
            let back: Scenario = serde_json::from_str(&json).unwrap();
            back.validate().unwrap();
            assert_eq!(back.name, sc.name);
        }
    }

    #[test]
    fn validation_rejects_bad_setups() {
        let mut sc = base("bad", 1, ConsensusKind::RoundRobinStrong, 1);
        sc.n = 5;
        assert_eq!(sc.validate(), Err(ScenarioError::BadQuorum { n: 5, t: 1, expected: 4 }));
        let mut sc = attack_scenario(AttackKind::Displacement, 1, ConsensusKind::RoundRobinStrong);
        sc.attack.as_mut().unwrap().attacker = 9;
        assert_eq!(sc.validate(), Err(ScenarioError::BadAttacker(9)));
        let mut sc = attack_scenario(AttackKind::Displacement, 1, ConsensusKind::RoundRobinStrong);
        sc.attack.as_mut().unwrap().victim_nonce = 99;
        assert_eq!(sc.validate(), Err(ScenarioError::UnknownVictimTx(99)));
        let mut sc = base("dup", 1, ConsensusKind::RoundRobinStrong, 1);
        sc.clients = vec![ClientScript {
            client: 1,
            txs: vec![
                ScriptedTx { round: 1, nonce: 0, payload: "a".into(), fee: 1 },
                ScriptedTx { round: 2, nonce: 0, payload: "b".into(), fee: 1 },
            ],
        }];
        assert_eq!(sc.validate(), Err(ScenarioError::DuplicateNonce { client: 1, nonce: 0 }));
    }

    #[test]
    fn victim_tx_matches_client_construction() {
        let sc = attack_scenario(AttackKind::Sandwich, 1, ConsensusKind::FeePriorityBaseline);
        let v = sc.victim_tx().unwrap();
        assert_eq!(v.client, ProcessId::client(1));
        assert_eq!(v.fee, 10);
        // same inputs, same id: the report can recompute it independently
        assert_eq!(v.txid, sc.victim_tx().unwrap().txid);
    }
}
