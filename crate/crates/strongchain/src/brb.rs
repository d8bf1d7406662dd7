//! Byzantine reliable broadcast (echo/ready quorums) over the round
//! engine.
//!
//! One instance per (sender, label). A miner echoes on the first INIT
//! from the instance's sender, readies on n-t matching echoes or t+1
//! matching readies, and BR-delivers on 2t+1 matching readies, at most
//! once. Bodies travel in INIT and ECHO; READY carries only the digest.

use crate::core::{EventKind, MessageId, ProcessId, TraceEvent};
use crate::protocol::{body_digest, Payload};
use std::collections::{BTreeMap, BTreeSet};

/// Quorum parameters. Requires n >= 3t + 1 miners; the broadcasting
/// client is an additional untrusted sender outside these counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrbConfig {
    pub n: usize,
    pub t: usize,
}

impl BrbConfig {
    pub fn new(n: usize, t: usize) -> Self {
        assert!(n > 3 * t, "BRB requires n >= 3t + 1 miners");
        BrbConfig { n, t }
    }

    pub fn echo_threshold(&self) -> usize {
        self.n - self.t
    }

    pub fn ready_threshold_send(&self) -> usize {
        self.t + 1
    }

    pub fn ready_threshold_deliver(&self) -> usize {
        2 * self.t + 1
    }
}

/// Per-miner state of one broadcast instance.
#[derive(Debug, Default)]
pub struct BrbInstance {
    echoed: bool,
    readied: bool,
    delivered: bool,
    /// processes counted once per instance, regardless of digest
    echoers: BTreeSet<ProcessId>,
    readiers: BTreeSet<ProcessId>,
    echoes: BTreeMap<[u8; 32], BTreeSet<ProcessId>>,
    readies: BTreeMap<[u8; 32], BTreeSet<ProcessId>>,
    bodies: BTreeMap<[u8; 32], Vec<u8>>,
    /// deliver threshold met but body not yet known
    pending_deliver: Option<[u8; 32]>,
}

/// All instance machines owned by one miner.
#[derive(Debug)]
pub struct BrbMiner {
    cfg: BrbConfig,
    instances: BTreeMap<MessageId, BrbInstance>,
}

/// Messages to broadcast to all miners as a result of one step.
pub type BrbSends = Vec<Payload>;

impl BrbMiner {
    pub fn new(cfg: BrbConfig) -> Self {
        BrbMiner { cfg, instances: BTreeMap::new() }
    }

    /// Drop a finished instance (after the contained transaction is
    /// committed).
    pub fn garbage_collect(&mut self, instance: &MessageId) {
        self.instances.remove(instance);
    }

    /// Handle one BRB phase message delivered from `from`. Returns the
    /// phase messages to broadcast and, at most once per instance, the
    /// delivered body.
    pub fn on_envelope(
        &mut self,
        from: ProcessId,
        payload: &Payload,
    ) -> (BrbSends, Option<(MessageId, Vec<u8>)>) {
        let mut sends = Vec::new();
        let mut delivered = None;
        match payload {
            Payload::BrbInit { instance, body } => {
                // only the instance's sender may initiate it
                if from != instance.sender {
                    return (sends, None);
                }
                let st = self.instances.entry(instance.clone()).or_default();
                let digest = body_digest(body);
                st.bodies.entry(digest).or_insert_with(|| body.clone());
                if !st.echoed {
                    st.echoed = true;
                    sends.push(Payload::BrbEcho {
                        instance: instance.clone(),
                        digest,
                        body: body.clone(),
                    });
                }
                delivered = self.try_deliver(instance);
            }
            Payload::BrbEcho { instance, digest, body } => {
                let st = self.instances.entry(instance.clone()).or_default();
                if body_digest(body) != *digest || !st.echoers.insert(from) {
                    return (sends, None);
                }
                st.bodies.entry(*digest).or_insert_with(|| body.clone());
                st.echoes.entry(*digest).or_default().insert(from);
                if st.echoes[digest].len() >= self.cfg.echo_threshold() && !st.readied {
                    st.readied = true;
                    sends.push(Payload::BrbReady { instance: instance.clone(), digest: *digest });
                }
                delivered = self.try_deliver(instance);
            }
            Payload::BrbReady { instance, digest } => {
                let st = self.instances.entry(instance.clone()).or_default();
                if !st.readiers.insert(from) {
                    return (sends, None);
                }
                st.readies.entry(*digest).or_default().insert(from);
                let count = st.readies[digest].len();
                if count >= self.cfg.ready_threshold_send() && !st.readied {
                    st.readied = true;
                    sends.push(Payload::BrbReady { instance: instance.clone(), digest: *digest });
                }
                if count >= self.cfg.ready_threshold_deliver() && !st.delivered {
                    st.pending_deliver = Some(*digest);
                }
                delivered = self.try_deliver(instance);
            }
            _ => {}
        }
        (sends, delivered)
    }

    fn try_deliver(&mut self, instance: &MessageId) -> Option<(MessageId, Vec<u8>)> {
        let st = self.instances.get_mut(instance)?;
        if st.delivered {
            return None;
        }
        let digest = st.pending_deliver?;
        let body = st.bodies.get(&digest)?.clone();
        st.delivered = true;
        st.pending_deliver = None;
        Some((instance.clone(), body))
    }
}

/// Payload for a BR_broadcast: the sender's INIT to all miners.
pub fn br_broadcast(instance: MessageId, body: Vec<u8>) -> Payload {
    Payload::BrbInit { instance, body }
}

/// Observed latency of a completed instance, in rounds inclusive of
/// both the broadcast round and the delivery round: `gamma_obs` to the
/// first correct BR_deliver, `beta_obs` to the last. `None` when the
/// instance was never delivered (or never broadcast).
pub fn measured_latency(trace: &[TraceEvent], instance: &MessageId) -> Option<(u64, u64)> {
    let broadcast_round = trace.iter().find_map(|ev| match &ev.kind {
        EventKind::Send { instance: Some(i), .. }
            if i == instance && ev.process == instance.sender =>
        {
            Some(ev.round)
        }
        _ => None,
    })?;
    let mut first = None;
    let mut last = None;
    for ev in trace {
        if let EventKind::BrDeliver { instance: i } = &ev.kind {
            if i == instance {
                first.get_or_insert(ev.round);
                last = Some(ev.round);
            }
        }
    }
    let first = first?;
    Some((first - broadcast_round + 1, last.unwrap() - broadcast_round + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> BrbConfig {
        BrbConfig::new(4, 1)
    }

    fn instance() -> MessageId {
        MessageId::new(ProcessId::client(1), b"nonce0".to_vec())
    }

    #[test]
    fn thresholds_at_n4_t1() {
        let c = cfg();
        assert_eq!(c.echo_threshold(), 3);
        assert_eq!(c.ready_threshold_send(), 2);
        assert_eq!(c.ready_threshold_deliver(), 3);
    }

    #[test]
    fn echo_quorum_triggers_ready() {
        let mut m = BrbMiner::new(cfg());
        let inst = instance();
        let body = b"tx".to_vec();
        let d = body_digest(&body);
        for i in 1..=2 {
            let (sends, _) = m.on_envelope(
                ProcessId::miner(i),
                &Payload::BrbEcho { instance: inst.clone(), digest: d, body: body.clone() },
            );
            assert!(sends.is_empty());
        }
        let (sends, _) = m.on_envelope(
            ProcessId::miner(3),
            &Payload::BrbEcho { instance: inst.clone(), digest: d, body: body.clone() },
        );
        assert!(matches!(sends.as_slice(), [Payload::BrbReady { .. }]));
    }

    #[test]
    fn ready_amplification_and_single_delivery() {
        let mut m = BrbMiner::new(cfg());
        let inst = instance();
        let body = b"tx".to_vec();
        let d = body_digest(&body);
        // learn the body from one echo
        m.on_envelope(
            ProcessId::miner(1),
            &Payload::BrbEcho { instance: inst.clone(), digest: d, body: body.clone() },
        );
        // t+1 = 2 readies: amplification
        m.on_envelope(
            ProcessId::miner(2),
            &Payload::BrbReady { instance: inst.clone(), digest: d },
        );
        let (sends, delivered) = m.on_envelope(
            ProcessId::miner(3),
            &Payload::BrbReady { instance: inst.clone(), digest: d },
        );
        assert!(matches!(sends.as_slice(), [Payload::BrbReady { .. }]));
        assert!(delivered.is_none());
        // 2t+1 = 3 readies: deliver exactly once
        let (_, delivered) = m.on_envelope(
            ProcessId::miner(4),
            &Payload::BrbReady { instance: inst.clone(), digest: d },
        );
        assert_eq!(delivered, Some((inst.clone(), body)));
        let (_, again) = m.on_envelope(
            ProcessId::miner(1),
            &Payload::BrbReady { instance: inst.clone(), digest: d },
        );
        assert!(again.is_none());
    }

    #[test]
    fn duplicate_phase_messages_ignored() {
        let mut m = BrbMiner::new(cfg());
        let inst = instance();
        let body = b"tx".to_vec();
        let d = body_digest(&body);
        for _ in 0..3 {
            m.on_envelope(
                ProcessId::miner(1),
                &Payload::BrbEcho { instance: inst.clone(), digest: d, body: body.clone() },
            );
        }
        assert_eq!(m.instances[&inst].echoes[&d].len(), 1);
    }

    #[test]
    fn init_from_wrong_sender_ignored() {
        let mut m = BrbMiner::new(cfg());
        let inst = instance();
        let (sends, _) = m.on_envelope(
            ProcessId::miner(2),
            &Payload::BrbInit { instance: inst.clone(), body: b"x".to_vec() },
        );
        assert!(sends.is_empty());
        assert!(m.instances.is_empty());
    }

    #[test]
    fn deliver_waits_for_body() {
        // readies arrive before any body-carrying message
        let mut m = BrbMiner::new(cfg());
        let inst = instance();
        let body = b"tx".to_vec();
        let d = body_digest(&body);
        for i in 1..=3 {
            let (_, delivered) = m.on_envelope(
                ProcessId::miner(i),
                &Payload::BrbReady { instance: inst.clone(), digest: d },
            );
            assert!(delivered.is_none());
        }
        let (_, delivered) = m.on_envelope(
            ProcessId::miner(4),
            &Payload::BrbEcho { instance: inst.clone(), digest: d, body: body.clone() },
        );
        assert_eq!(delivered, Some((inst, body)));
    }
}
