//! Happens-before relation over messages, built from an engine trace.
//!
//! Direct edges come from two rules: a process's own sends are ordered
//! by send order, and anything a process sent or delivered before
//! sending `m'` precedes `m'`. Transitivity is closed on query.

use super::{EventKind, MessageId, ProcessId, TraceEvent, TxId};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HbError {
    #[error("deliver of {message} at {at} has no matching send (impersonation)")]
    Impersonation { message: MessageId, at: ProcessId },
    #[error("no carrying message known for transaction {0}")]
    UnknownTx(TxId),
}

/// Strict partial order on message ids. Direct edges are stored;
/// reachability queries close transitively.
#[derive(Debug, Clone, Default)]
pub struct HappensBefore {
    adjacency: BTreeMap<MessageId, BTreeSet<MessageId>>,
}

impl HappensBefore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build the relation from one engine run's events, in engine order.
    pub fn from_trace(events: &[TraceEvent]) -> Result<Self, HbError> {
        let mut hb = HappensBefore::new();
        hb.insert(events)?;
        Ok(hb)
    }

    /// Fold more events (from the same run, in engine order) into the
    /// relation.
    pub fn insert(&mut self, events: &[TraceEvent]) -> Result<(), HbError> {
        let mut sent: BTreeSet<MessageId> = self.adjacency.keys().cloned().collect();
        for s in self.adjacency.values() {
            sent.extend(s.iter().cloned());
        }
        // per-process sequence of messages sent or delivered so far
        let mut history: BTreeMap<ProcessId, Vec<MessageId>> = BTreeMap::new();
        for ev in events {
            match &ev.kind {
                EventKind::Send { message, .. } => {
                    sent.insert(message.clone());
                    let h = history.entry(ev.process).or_default();
                    for prior in h.iter() {
                        if prior != message {
                            self.adjacency
                                .entry(prior.clone())
                                .or_default()
                                .insert(message.clone());
                        }
                    }
                    h.push(message.clone());
                }
                EventKind::Deliver { message, .. } => {
                    if !sent.contains(message) {
                        return Err(HbError::Impersonation {
                            message: message.clone(),
                            at: ev.process,
                        });
                    }
                    history.entry(ev.process).or_default().push(message.clone());
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Direct successors of a message.
    pub fn successors(&self, m: &MessageId) -> impl Iterator<Item = &MessageId> {
        self.adjacency.get(m).into_iter().flatten()
    }

    /// True iff `a` happens-before `b` under the transitive closure.
    /// Irreflexive: `precedes(m, m)` is false on acyclic traces.
    pub fn precedes(&self, a: &MessageId, b: &MessageId) -> bool {
        let mut queue: VecDeque<&MessageId> = self.successors(a).collect();
        let mut seen: BTreeSet<&MessageId> = queue.iter().copied().collect();
        while let Some(m) = queue.pop_front() {
            if m == b {
                return true;
            }
            for next in self.successors(m) {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        false
    }

    /// Detect a cycle anywhere in the relation (engine traces must be
    /// acyclic).
    pub fn has_cycle(&self) -> bool {
        self.adjacency.keys().any(|m| self.precedes(m, m))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(|s| s.len()).sum()
    }
}

/// Lift the message relation to transactions through their carrying
/// messages. Errors when a txid has no envelope message.
pub fn hb_tx(
    hb: &HappensBefore,
    t1: &TxId,
    t2: &TxId,
    envelope: &BTreeMap<TxId, MessageId>,
) -> Result<bool, HbError> {
    let m1 = envelope.get(t1).ok_or(HbError::UnknownTx(*t1))?;
    let m2 = envelope.get(t2).ok_or(HbError::UnknownTx(*t2))?;
    if t1 == t2 {
        return Ok(false);
    }
    Ok(hb.precedes(m1, m2))
}
