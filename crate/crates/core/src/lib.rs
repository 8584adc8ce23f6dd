//! Deterministic virtual-time simulator and analysis library for Reticulum,
//! a two-layer (process/control shard) blockchain sharding protocol.
//!
//! The crate is organized around the protocol's moving parts:
//!
//! * [`params`] — shard sizing, failure probability, liveness rate, bandwidth
//!   and time-bound formulas (pure functions).
//! * [`model`] — the domain data model: nodes, transactions, states, blocks,
//!   votes, with canonical binary encodings and Merkle utilities.
//! * [`simnet`] — deterministic virtual-time message scheduler with bounded
//!   delay and per-node bandwidth accounting.
//! * [`bb`] — the synchronous Byzantine broadcast used to give every control
//!   shard member an identical view of process-shard votes.
//! * [`engine`] — bootstrapping, the two-phase epoch loop, violation and
//!   expulsion ledger, state evolution.
//! * [`adversary`] — scripted attack strategies (BankRun, Average, Worst,
//!   Suicidal, InvalidProposer).
//! * [`crossshard`] — two-leg cross-shard transactions with Merkle proofs.
//! * [`compare`] — the one-layer baseline and the Gearbox gear-finding
//!   Monte Carlo used for comparisons.
//! * [`harness`] — scenario configuration, orchestration and CSV emission.

pub mod adversary;
pub mod bb;
pub mod compare;
pub mod crossshard;
pub mod engine;
pub mod harness;
pub mod model;
pub mod params;
pub mod rng;
pub mod simnet;
