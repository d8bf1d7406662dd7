//! Causal-violation detector: finds ordered pairs where a transaction
//! that causally preceded another was nonetheless recorded after it.

use crate::core::hb::{hb_tx, HappensBefore, HbError};
use crate::core::{BlockTree, EventKind, MessageId, TraceEvent, TxId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One detected inversion: `earlier` causally precedes `later`, yet
/// the chain records `later` first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub earlier: TxId,
    pub later: TxId,
    pub earlier_pos: (usize, usize),
    pub later_pos: (usize, usize),
}

/// Map each causally delivered transaction to the engine message that
/// first carried its broadcast: the instance sender's first send
/// tagged with that instance.
pub fn carrying_messages(trace: &[TraceEvent]) -> BTreeMap<TxId, MessageId> {
    let mut first_send: BTreeMap<MessageId, MessageId> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for ev in trace {
        match &ev.kind {
            EventKind::Send { message, instance: Some(inst) } if ev.process == inst.sender => {
                first_send.entry(inst.clone()).or_insert_with(|| message.clone());
            }
            EventKind::BcDeliver { txid, instance } => {
                if let Some(m) = first_send.get(instance) {
                    out.entry(*txid).or_insert_with(|| m.clone());
                }
            }
            _ => {}
        }
    }
    out
}

/// Scan the agreed chain for causal inversions. Pairs whose carrying
/// message is unknown (never broadcast through the engine) are skipped.
pub fn detect_violations(trace: &[TraceEvent], tree: &BlockTree) -> Result<Vec<Violation>, HbError> {
    let Some(chain) = tree.consensus_chain() else {
        return Ok(Vec::new());
    };
    let hb = HappensBefore::from_trace(trace)?;
    let envelope = carrying_messages(trace);
    let mut recorded: Vec<(TxId, (usize, usize))> = Vec::new();
    for (bi, block) in chain.iter().enumerate() {
        for (ti, tx) in block.txs.iter().enumerate() {
            recorded.push((tx.txid, (bi, ti)));
        }
    }
    let mut violations = Vec::new();
    for (i, (first, first_pos)) in recorded.iter().enumerate() {
        for (second, second_pos) in &recorded[i + 1..] {
            if !envelope.contains_key(first) || !envelope.contains_key(second) {
                continue;
            }
            // `second` is recorded after `first`; a violation needs the
            // causal arrow to point the other way
            if hb_tx(&hb, second, first, &envelope)? {
                violations.push(Violation {
                    earlier: *second,
                    later: *first,
                    earlier_pos: *second_pos,
                    later_pos: *first_pos,
                });
            }
        }
    }
    Ok(violations)
}
