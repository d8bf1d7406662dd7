//! Deterministic lock-step synchronous round engine.
//!
//! Each round: every live process gets a round-start hook and its
//! outgoing FIFO queue is drained and broadcast; at round end every
//! destination queue is drained in FIFO order and handed to the
//! destination's deliver handler. Handlers may only enqueue sends,
//! which go out at the start of the next round. Deliveries within a
//! round are processed in ascending (sender id, send sequence) order,
//! so identical seeds and scenarios produce byte-identical traces.

use crate::core::{EventKind, MessageId, ProcessId, TraceEvent};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("process {0} already registered")]
    DuplicateProcess(ProcessId),
    #[error("process {0} does not exist")]
    UnknownProcess(ProcessId),
    #[error("byzantine budget of {budget} miners exhausted")]
    ByzantineBudgetExceeded { budget: usize },
}

/// Where a message goes. Broadcasts fan out to every matching process,
/// in ascending id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    /// All miners (protocol messages).
    Miners,
    /// Every process, clients included (consensus traffic that clients
    /// observe passively).
    All,
    One(ProcessId),
}

/// A send request queued by a behavior. One `Outgoing` is one message
/// id, regardless of fan-out. `instance` tags protocol messages with
/// the broadcast instance they serve, for trace attribution.
#[derive(Debug, Clone)]
pub struct Outgoing<P> {
    pub dest: Destination,
    pub payload: P,
    pub instance: Option<MessageId>,
}

/// An engine-stamped message as seen by a destination. `from` cannot be
/// forged by the sender.
#[derive(Debug, Clone)]
pub struct Envelope<P> {
    pub id: MessageId,
    pub from: ProcessId,
    pub to: ProcessId,
    pub payload: P,
}

enum LocalNote {
    BrDeliver(MessageId),
    BcDeliver { txid: crate::core::TxId, instance: MessageId },
    BlockCommit(crate::core::BlockHash),
}

/// Handle given to behavior hooks: emit protocol-level trace notes and
/// draw deterministic per-process randomness.
pub struct Ctx<'a> {
    pub round: u64,
    pub id: ProcessId,
    pub rng: &'a mut ChaCha20Rng,
    notes: Vec<LocalNote>,
}

/// Typed send buffer handed to behaviors alongside `Ctx`. Everything
/// pushed here lands in the process's FIFO send queue.
pub struct Mailbox<P> {
    sends: Vec<Outgoing<P>>,
}

impl<P> Mailbox<P> {
    pub fn send(&mut self, dest: Destination, payload: P, instance: Option<MessageId>) {
        self.sends.push(Outgoing { dest, payload, instance });
    }
}

impl Ctx<'_> {
    pub fn note_br_deliver(&mut self, instance: MessageId) {
        self.notes.push(LocalNote::BrDeliver(instance));
    }

    pub fn note_bc_deliver(&mut self, txid: crate::core::TxId, instance: MessageId) {
        self.notes.push(LocalNote::BcDeliver { txid, instance });
    }

    pub fn note_block_commit(&mut self, block: crate::core::BlockHash) {
        self.notes.push(LocalNote::BlockCommit(block));
    }
}

/// A process behavior driven by the engine. Implementations own all of
/// their protocol state; cross-process interaction happens only through
/// envelopes.
pub trait Behavior<P> {
    /// Called at the start of each round; sends queued here go out this
    /// round.
    fn on_round_start(&mut self, _ctx: &mut Ctx<'_>, _mail: &mut Mailbox<P>) {}

    /// Called once per delivered envelope at round end; sends queued
    /// here go out next round.
    fn on_deliver(&mut self, _ctx: &mut Ctx<'_>, _mail: &mut Mailbox<P>, _env: &Envelope<P>) {}

    /// Called after all deliveries of the round.
    fn on_round_end(&mut self, _ctx: &mut Ctx<'_>, _mail: &mut Mailbox<P>) {}

    /// Expose the local block tree, if this behavior maintains one.
    fn chain(&self) -> Option<&crate::core::BlockTree> {
        None
    }

    /// Order-independent digest of the local memory pool, if any.
    fn mempool_digest(&self) -> Option<[u8; 32]> {
        None
    }

    /// Digest snapshots recorded at each round end, for cross-process
    /// consistency checks after a run.
    fn round_digests(&self) -> Option<&[(u64, [u8; 32])]> {
        None
    }
}

struct Proc<P> {
    behavior: Box<dyn Behavior<P>>,
    outbox: VecDeque<Outgoing<P>>,
    inbox: VecDeque<Envelope<P>>,
    halted: bool,
    send_counter: u64,
    rng: ChaCha20Rng,
}

/// Lock-step engine over a fixed process set.
pub struct RoundEngine<P> {
    round: u64,
    seq: u64,
    procs: BTreeMap<ProcessId, Proc<P>>,
    trace: Vec<TraceEvent>,
    byzantine_budget: usize,
    byzantine_miners: BTreeSet<ProcessId>,
    seed: u64,
}

impl<P: Clone> RoundEngine<P> {
    /// `byzantine_budget` caps how many miners may be replaced through
    /// [`RoundEngine::byzantine_hook`] or halted.
    pub fn new(seed: u64, byzantine_budget: usize) -> Self {
        RoundEngine {
            round: 0,
            seq: 0,
            procs: BTreeMap::new(),
            trace: Vec::new(),
            byzantine_budget,
            byzantine_miners: BTreeSet::new(),
            seed,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn add_process(
        &mut self,
        id: ProcessId,
        behavior: Box<dyn Behavior<P>>,
    ) -> Result<(), EngineError> {
        if self.procs.contains_key(&id) {
            return Err(EngineError::DuplicateProcess(id));
        }
        let mut h = Sha256::new();
        h.update(b"strongchain.rng");
        h.update(self.seed.to_be_bytes());
        h.update([match id.kind {
            crate::core::ProcessKind::Miner => 0u8,
            crate::core::ProcessKind::Client => 1u8,
        }]);
        h.update(id.index.to_be_bytes());
        let rng = ChaCha20Rng::from_seed(h.finalize().into());
        self.procs.insert(
            id,
            Proc {
                behavior,
                outbox: VecDeque::new(),
                inbox: VecDeque::new(),
                halted: false,
                send_counter: 0,
                rng,
            },
        );
        Ok(())
    }

    /// Replace a process's behavior with an arbitrary (Byzantine)
    /// strategy. Replacing a miner consumes one unit of the configured
    /// Byzantine budget.
    pub fn byzantine_hook(
        &mut self,
        id: ProcessId,
        strategy: Box<dyn Behavior<P>>,
    ) -> Result<(), EngineError> {
        if !self.procs.contains_key(&id) {
            return Err(EngineError::UnknownProcess(id));
        }
        self.charge_budget(id)?;
        self.procs.get_mut(&id).unwrap().behavior = strategy;
        Ok(())
    }

    /// Crash a process: its handlers are skipped from now on. Halting a
    /// miner counts against the Byzantine budget (crash is a subset of
    /// Byzantine behavior).
    pub fn halt(&mut self, id: ProcessId) -> Result<(), EngineError> {
        if !self.procs.contains_key(&id) {
            return Err(EngineError::UnknownProcess(id));
        }
        self.charge_budget(id)?;
        self.procs.get_mut(&id).unwrap().halted = true;
        Ok(())
    }

    fn charge_budget(&mut self, id: ProcessId) -> Result<(), EngineError> {
        if id.is_miner() && !self.byzantine_miners.contains(&id) {
            if self.byzantine_miners.len() >= self.byzantine_budget {
                return Err(EngineError::ByzantineBudgetExceeded { budget: self.byzantine_budget });
            }
            self.byzantine_miners.insert(id);
        }
        Ok(())
    }

    pub fn byzantine_miners(&self) -> &BTreeSet<ProcessId> {
        &self.byzantine_miners
    }

    fn resolve(&self, from: ProcessId, dest: Destination) -> Vec<ProcessId> {
        let _ = from;
        match dest {
            Destination::Miners => self.procs.keys().copied().filter(|p| p.is_miner()).collect(),
            Destination::All => self.procs.keys().copied().collect(),
            Destination::One(p) => {
                if self.procs.contains_key(&p) {
                    vec![p]
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn push_trace(&mut self, process: ProcessId, kind: EventKind) {
        let ev = TraceEvent { round: self.round, seq: self.seq, process, kind };
        self.seq += 1;
        self.trace.push(ev);
    }

    fn flush_local(&mut self, id: ProcessId, notes: Vec<LocalNote>, sends: Vec<Outgoing<P>>) {
        for note in notes {
            let kind = match note {
                LocalNote::BrDeliver(instance) => EventKind::BrDeliver { instance },
                LocalNote::BcDeliver { txid, instance } => EventKind::BcDeliver { txid, instance },
                LocalNote::BlockCommit(block) => EventKind::BlockCommit { block },
            };
            self.push_trace(id, kind);
        }
        self.procs.get_mut(&id).unwrap().outbox.extend(sends);
    }

    fn run_hook(
        &mut self,
        id: ProcessId,
        f: impl FnOnce(&mut dyn Behavior<P>, &mut Ctx<'_>, &mut Mailbox<P>),
    ) {
        let round = self.round;
        let notes;
        let mut mail = Mailbox { sends: Vec::new() };
        {
            let proc = self.procs.get_mut(&id).unwrap();
            let mut ctx = Ctx { round, id, rng: &mut proc.rng, notes: Vec::new() };
            f(proc.behavior.as_mut(), &mut ctx, &mut mail);
            notes = ctx.notes;
        }
        self.flush_local(id, notes, mail.sends);
    }

    /// Execute one lock-step round.
    pub fn step(&mut self) {
        let ids: Vec<ProcessId> = self.procs.keys().copied().collect();

        // round start hooks; their sends join this round's outbox drain
        for &id in &ids {
            if self.procs[&id].halted {
                continue;
            }
            self.run_hook(id, |b, ctx, mail| b.on_round_start(ctx, mail));
        }

        // send phase: drain every outbox in FIFO order
        for &id in &ids {
            let outgoing: Vec<Outgoing<P>> = {
                let proc = self.procs.get_mut(&id).unwrap();
                if proc.halted {
                    proc.outbox.clear();
                    continue;
                }
                proc.outbox.drain(..).collect()
            };
            for out in outgoing {
                let msg_id = {
                    let proc = self.procs.get_mut(&id).unwrap();
                    let m = MessageId::from_seq(id, proc.send_counter);
                    proc.send_counter += 1;
                    m
                };
                self.push_trace(
                    id,
                    EventKind::Send { message: msg_id.clone(), instance: out.instance.clone() },
                );
                for dest in self.resolve(id, out.dest) {
                    let env = Envelope {
                        id: msg_id.clone(),
                        from: id,
                        to: dest,
                        payload: out.payload.clone(),
                    };
                    self.procs.get_mut(&dest).unwrap().inbox.push_back(env);
                }
            }
        }

        // deliver phase: drain every inbox in FIFO order
        for &id in &ids {
            let inbox: Vec<Envelope<P>> = {
                let proc = self.procs.get_mut(&id).unwrap();
                let drained: Vec<Envelope<P>> = proc.inbox.drain(..).collect();
                if proc.halted {
                    continue;
                }
                drained
            };
            for env in inbox {
                self.push_trace(id, EventKind::Deliver { message: env.id.clone(), from: env.from });
                self.run_hook(id, |b, ctx, mail| b.on_deliver(ctx, mail, &env));
            }
        }

        // round end hooks
        for &id in &ids {
            if self.procs[&id].halted {
                continue;
            }
            self.run_hook(id, |b, ctx, mail| b.on_round_end(ctx, mail));
        }

        self.round += 1;
    }

    /// Run exactly `max_rounds` rounds and return the full trace.
    pub fn run(&mut self, max_rounds: u64) -> &[TraceEvent] {
        for _ in 0..max_rounds {
            self.step();
        }
        &self.trace
    }

    /// Read-only access to a behavior, for post-run extraction.
    pub fn behavior(&self, id: ProcessId) -> Option<&dyn Behavior<P>> {
        self.procs.get(&id).map(|p| p.behavior.as_ref())
    }

    pub fn process_ids(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.procs.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ProcessKind;

    #[derive(Debug, Clone, PartialEq)]
    enum TestMsg {
        Ping(u64),
    }

    /// Broadcasts one message per scripted round.
    struct Scripted {
        rounds: Vec<u64>,
    }

    impl Behavior<TestMsg> for Scripted {
        fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<TestMsg>) {
            if self.rounds.contains(&ctx.round) {
                mail.send(Destination::Miners, TestMsg::Ping(ctx.round), None);
            }
        }
    }

    struct Sink;
    impl Behavior<TestMsg> for Sink {}

    fn engine_with(n: u32, budget: usize, scripted: &[(u32, Vec<u64>)]) -> RoundEngine<TestMsg> {
        let mut eng = RoundEngine::new(42, budget);
        for i in 1..=n {
            let pid = ProcessId::miner(i);
            let script = scripted.iter().find(|(m, _)| *m == i).map(|(_, r)| r.clone());
            match script {
                Some(rounds) => eng.add_process(pid, Box::new(Scripted { rounds })).unwrap(),
                None => eng.add_process(pid, Box::new(Sink)).unwrap(),
            }
        }
        eng
    }

    fn deliver_count(trace: &[TraceEvent]) -> usize {
        trace.iter().filter(|e| matches!(e.kind, EventKind::Deliver { .. })).count()
    }

    #[test]
    fn same_round_delivery() {
        let mut eng = engine_with(4, 0, &[(1, vec![0])]);
        eng.step();
        let trace = eng.trace();
        let delivers: Vec<&TraceEvent> =
            trace.iter().filter(|e| matches!(e.kind, EventKind::Deliver { .. })).collect();
        assert_eq!(delivers.len(), 4);
        assert!(delivers.iter().all(|e| e.round == 0));
    }

    #[test]
    fn empty_round_only_increments() {
        let mut eng = engine_with(3, 0, &[]);
        eng.run(5);
        assert_eq!(eng.round(), 5);
        assert!(eng.trace().is_empty());
    }

    #[test]
    fn fifo_per_link() {
        struct TwoSends;
        impl Behavior<TestMsg> for TwoSends {
            fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<TestMsg>) {
                if ctx.round == 0 {
                    mail.send(Destination::One(ProcessId::miner(2)), TestMsg::Ping(1), None);
                    mail.send(Destination::One(ProcessId::miner(2)), TestMsg::Ping(2), None);
                }
            }
        }
        struct Recorder {
            got: Vec<u64>,
        }
        impl Behavior<TestMsg> for Recorder {
            fn on_deliver(&mut self, _: &mut Ctx<'_>, _: &mut Mailbox<TestMsg>, env: &Envelope<TestMsg>) {
                let TestMsg::Ping(v) = env.payload;
                self.got.push(v);
            }
        }
        let mut eng: RoundEngine<TestMsg> = RoundEngine::new(1, 0);
        eng.add_process(ProcessId::miner(1), Box::new(TwoSends)).unwrap();
        eng.add_process(ProcessId::miner(2), Box::new(Recorder { got: vec![] })).unwrap();
        eng.step();
        // order is observable through the trace: two delivers at m2 in send order
        let msgs: Vec<MessageId> = eng
            .trace()
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Deliver { message, .. } if e.process == ProcessId::miner(2) => {
                    Some(message.clone())
                }
                _ => None,
            })
            .collect();
        assert_eq!(msgs.len(), 2);
        assert!(msgs[0].label < msgs[1].label);
    }

    #[test]
    fn n4_broadcast_counts() {
        // 4 miners all broadcasting once in round 0: 4*4 delivers
        let mut eng =
            engine_with(4, 0, &[(1, vec![0]), (2, vec![0]), (3, vec![0]), (4, vec![0])]);
        eng.step();
        assert_eq!(deliver_count(eng.trace()), 16);
    }

    #[test]
    fn determinism_same_seed() {
        let run = || {
            let mut eng =
                engine_with(4, 0, &[(1, vec![0, 2]), (2, vec![1]), (3, vec![0]), (4, vec![3])]);
            eng.run(6).to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn halted_process_is_skipped() {
        let mut eng = engine_with(4, 1, &[(1, vec![0, 1, 2])]);
        eng.halt(ProcessId::miner(1)).unwrap();
        eng.run(3);
        assert!(eng.trace().is_empty());
    }

    #[test]
    fn byzantine_budget_enforced() {
        let mut eng = engine_with(4, 0, &[]);
        let err = eng.byzantine_hook(ProcessId::miner(2), Box::new(Sink)).unwrap_err();
        assert_eq!(err, EngineError::ByzantineBudgetExceeded { budget: 0 });
        // clients are not budgeted
        let mut eng2: RoundEngine<TestMsg> = RoundEngine::new(1, 0);
        eng2.add_process(ProcessId { kind: ProcessKind::Client, index: 1 }, Box::new(Sink))
            .unwrap();
        eng2.byzantine_hook(ProcessId { kind: ProcessKind::Client, index: 1 }, Box::new(Sink))
            .unwrap();
    }

    #[test]
    fn deliver_never_precedes_send_round() {
        let mut eng = engine_with(4, 0, &[(1, vec![0, 1]), (3, vec![2])]);
        eng.run(4);
        let mut send_round: BTreeMap<MessageId, u64> = BTreeMap::new();
        for ev in eng.trace() {
            match &ev.kind {
                EventKind::Send { message, .. } => {
                    send_round.insert(message.clone(), ev.round);
                }
                EventKind::Deliver { message, .. } => {
                    assert_eq!(send_round[message], ev.round);
                }
                _ => {}
            }
        }
    }
}
