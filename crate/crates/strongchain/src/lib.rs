//! Deterministic round-based simulator and library for a
//! causality-preserving ("strong") blockchain protocol.
//!
//! A lock-step synchronous engine drives miners and clients in rounds.
//! Clients threshold-encrypt transactions and broadcast the ciphertexts
//! through Byzantine reliable broadcast; miners release decryption
//! shares one round later, decrypt simultaneously once 2t+1 verified
//! shares are held, and track every transaction's causal past. Block
//! proposals are gated on that causal past, which makes front-running
//! (displacement, sandwich, suppression) a detectable causal-order
//! violation — impossible on the strong chain, demonstrable on the
//! plaintext fee-priority baseline that ships alongside it.
//!
//! Modules follow the protocol stack bottom-up: [`core`] (domain types
//! and happens-before), [`rounds`] (the engine), [`tcrypto`] (threshold
//! encryption), [`brb`] (reliable broadcast), [`bcb`] (causal broadcast
//! of transactions), [`chain`] (safe blocks and consensus plugs),
//! [`node`] (miner/client behaviors), [`adversary`] (front-running
//! strategies) and [`harness`] (scenarios, detector, reports, CLI
//! plumbing).

pub mod adversary;
pub mod bcb;
pub mod brb;
pub mod chain;
pub mod core;
pub mod harness;
pub mod node;
pub mod protocol;
pub mod rounds;
pub mod tcrypto;
