//! Two-leg cross-shard transactions with Merkle-proof completion.
//!
//! The recipient's shard initiates the decomposition: a cross transaction is
//! split into a deduct leg committed by the sender's shard and a deposit leg
//! that becomes includable only once a Merkle proof shows the deduct leg
//! inside an accepted block. Legs are single-sender/single-recipient;
//! multi-party transfers decompose into independent legs with no cross-leg
//! rollback.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    merkle_proof, verify_merkle, Address, Epoch, Hash256, MerkleProof, NodeId, ProcessBlock,
    ShardIndex, SignatureScheme, Transaction, TxKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossStatus {
    /// Legs generated, deduct leg queued for the sender's shard.
    Pending,
    /// Deduct leg inside an accepted block; proof not yet emitted.
    Leg1Committed,
    /// Proof emitted; deposit leg queued for the recipient's shard.
    Proven,
    /// Deposit leg inside an accepted block of the recipient's shard.
    Completed,
    /// Terminal rejection (bad signature or insufficient balance).
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    BadSignature,
    InsufficientBalance,
}

#[derive(Debug, Error, PartialEq)]
pub enum CrossError {
    #[error("cross transaction {0:?} already tracked")]
    Duplicate(Hash256),
    #[error("proof for {0:?} does not verify")]
    InvalidProof(Hash256),
}

/// A tracked cross-shard transfer and its two legs.
#[derive(Debug, Clone)]
pub struct CrossTx {
    pub original_id: Hash256,
    pub leg1: Transaction,
    pub leg2: Transaction,
    pub send_shard: ShardIndex,
    pub recv_shard: ShardIndex,
    pub amount: u64,
    pub status: CrossStatus,
    pub proof: Option<MerkleProof>,
    pub proof_root: Option<Hash256>,
    pub created_epoch: Epoch,
    pub completed_epoch: Option<Epoch>,
}

/// Book-keeping for every in-flight cross transaction, driven entirely by
/// the engine's epoch loop.
#[derive(Debug, Default)]
pub struct CrossShardManager {
    pub txs: BTreeMap<Hash256, CrossTx>,
    /// Deduct legs awaiting inclusion, per sender shard.
    queue_leg1: BTreeMap<ShardIndex, Vec<Hash256>>,
    /// Proven deposit legs awaiting inclusion, per recipient shard.
    queue_leg2: BTreeMap<ShardIndex, Vec<Hash256>>,
    /// Deposit-leg ids already applied; replayed proofs are refused here.
    completed_leg2: BTreeSet<Hash256>,
    pub discarded: Vec<(Hash256, DiscardReason)>,
}

impl CrossShardManager {
    pub fn new() -> Self {
        Self::default()
    }

    /// Handling at the recipient's shard: validate the signature, decompose
    /// into legs and dispatch the deduct leg to the sender's shard. A
    /// same-shard transfer short-circuits: the original is returned for
    /// inclusion as an ordinary intra-shard transaction.
    #[allow(clippy::too_many_arguments)]
    pub fn handle_at_receive(
        &mut self,
        original: &Transaction,
        send_shard: ShardIndex,
        recv_shard: ShardIndex,
        signer_node: NodeId,
        scheme: &dyn SignatureScheme,
        epoch: Epoch,
    ) -> Result<Option<Transaction>, CrossError> {
        if self.txs.contains_key(&original.id) {
            return Err(CrossError::Duplicate(original.id));
        }
        if original.content_hash() != original.id
            || !scheme.verify(signer_node, &original.id.0, &original.signature)
        {
            self.discarded
                .push((original.id, DiscardReason::BadSignature));
            return Ok(None);
        }
        if send_shard == recv_shard {
            return Ok(Some(original.clone()));
        }
        let leg1 = Transaction::build(
            original.sender,
            original.recipient,
            original.amount,
            original.nonce,
            TxKind::CrossLeg1,
            Some(original.id),
            signer_node,
            scheme,
        );
        let leg2 = Transaction::build(
            original.sender,
            original.recipient,
            original.amount,
            original.nonce,
            TxKind::CrossLeg2,
            Some(leg1.id),
            signer_node,
            scheme,
        );
        let id = original.id;
        self.txs.insert(
            id,
            CrossTx {
                original_id: id,
                leg1,
                leg2,
                send_shard,
                recv_shard,
                amount: original.amount,
                status: CrossStatus::Pending,
                proof: None,
                proof_root: None,
                created_epoch: epoch,
                completed_epoch: None,
            },
        );
        self.queue_leg1.entry(send_shard).or_default().push(id);
        Ok(None)
    }

    /// Deduct legs the sender shard's leader should try to include this
    /// epoch. `balance_of` is the leader's view of the pre-block state; legs
    /// that fail it are discarded for insufficient balance.
    pub fn take_leg1_for_block(
        &mut self,
        shard: ShardIndex,
        mut balance_of: impl FnMut(&Address) -> u64,
        budget: usize,
    ) -> Vec<Transaction> {
        let Some(queue) = self.queue_leg1.get_mut(&shard) else {
            return Vec::new();
        };
        let mut spent: BTreeMap<Address, u64> = BTreeMap::new();
        let mut out = Vec::new();
        let mut keep = Vec::new();
        for id in std::mem::take(queue) {
            if out.len() >= budget {
                keep.push(id);
                continue;
            }
            let tx = self.txs.get_mut(&id).expect("queued cross tx");
            let already = spent.get(&tx.leg1.sender).copied().unwrap_or(0);
            if balance_of(&tx.leg1.sender) < already + tx.amount {
                tx.status = CrossStatus::Discarded;
                self.discarded
                    .push((id, DiscardReason::InsufficientBalance));
                continue;
            }
            *spent.entry(tx.leg1.sender).or_insert(0) += tx.amount;
            // Leaves the queue at inclusion; a rejected block re-queues it
            // through `on_block_rejected`.
            out.push(tx.leg1.clone());
        }
        *queue = keep;
        out
    }

    /// Proven deposit legs the recipient shard's leader should include this
    /// epoch. Legs whose proof fails verification stay queued and are
    /// retried next epoch; already-completed legs are dropped (replay
    /// protection).
    pub fn take_leg2_for_block(
        &mut self,
        shard: ShardIndex,
        accepted_root: impl Fn(ShardIndex, &Hash256) -> bool,
        budget: usize,
    ) -> Vec<Transaction> {
        let Some(queue) = self.queue_leg2.get_mut(&shard) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut keep = Vec::new();
        for id in std::mem::take(queue) {
            if out.len() >= budget {
                keep.push(id);
                continue;
            }
            let tx = self.txs.get(&id).expect("queued cross tx");
            if self.completed_leg2.contains(&tx.leg2.id) {
                continue;
            }
            let ok = match (&tx.proof, &tx.proof_root) {
                (Some(proof), Some(root)) => {
                    accepted_root(tx.send_shard, root) && verify_merkle(*root, &tx.leg1, proof)
                }
                _ => false,
            };
            if ok {
                // Like leg1: out of the queue at inclusion, re-queued only
                // if the block is rejected.
                out.push(tx.leg2.clone());
            } else {
                // Invalid or missing proof: stays proven-pending, retried.
                keep.push(id);
            }
        }
        *queue = keep;
        out
    }

    /// Called when a proposed block is rejected: legs it carried go back to
    /// their queues for the next epoch.
    pub fn on_block_rejected(&mut self, shard: ShardIndex, block: &ProcessBlock) {
        let txs = match &block.payload {
            crate::model::BlockPayload::Transactions(txs) => txs,
            crate::model::BlockPayload::Synthetic { .. } => return,
        };
        for tx in txs {
            match tx.kind {
                TxKind::CrossLeg1 => {
                    if let Some(orig) = tx.cross_link {
                        if let Some(t) = self.txs.get(&orig) {
                            if t.status == CrossStatus::Pending && t.send_shard == shard {
                                self.queue_leg1.entry(shard).or_default().push(orig);
                            }
                        }
                    }
                }
                TxKind::CrossLeg2 => {
                    if let Some(leg1_id) = tx.cross_link {
                        if let Some(t) = self
                            .txs
                            .values()
                            .find(|t| t.leg1.id == leg1_id && t.recv_shard == shard)
                        {
                            if t.status == CrossStatus::Proven {
                                let orig = t.original_id;
                                self.queue_leg2.entry(shard).or_default().push(orig);
                            }
                        }
                    }
                }
                TxKind::Intra => {}
            }
        }
    }

    /// Called when a process block is accepted (unanimously or through the
    /// control shard). Emits proofs for deduct legs and completes deposit
    /// legs found in the block.
    pub fn on_block_accepted(&mut self, shard: ShardIndex, block: &ProcessBlock, epoch: Epoch) {
        let txs = match &block.payload {
            crate::model::BlockPayload::Transactions(txs) => txs,
            crate::model::BlockPayload::Synthetic { .. } => return,
        };
        for tx in txs {
            match tx.kind {
                TxKind::CrossLeg1 => {
                    let Some(orig) = tx.cross_link else { continue };
                    if let Some(tracked) = self.txs.get_mut(&orig) {
                        if tracked.status == CrossStatus::Pending && tracked.send_shard == shard {
                            tracked.status = CrossStatus::Leg1Committed;
                            let proof = merkle_proof(block, tx.id).expect("leg1 is in the block");
                            tracked.proof = Some(proof);
                            tracked.proof_root = Some(block.merkle_root);
                            tracked.status = CrossStatus::Proven;
                            self.queue_leg2
                                .entry(tracked.recv_shard)
                                .or_default()
                                .push(orig);
                        }
                    }
                }
                TxKind::CrossLeg2 => {
                    let Some(leg1_id) = tx.cross_link else {
                        continue;
                    };
                    // Find by the leg1 link.
                    if let Some(tracked) = self
                        .txs
                        .values_mut()
                        .find(|t| t.leg1.id == leg1_id && t.recv_shard == shard)
                    {
                        tracked.status = CrossStatus::Completed;
                        tracked.completed_epoch = Some(epoch);
                        self.completed_leg2.insert(tx.id);
                    }
                }
                TxKind::Intra => {}
            }
        }
    }

    /// Sum of amounts deducted but not yet deposited.
    pub fn in_flight_total(&self) -> u128 {
        self.txs
            .values()
            .filter(|t| matches!(t.status, CrossStatus::Leg1Committed | CrossStatus::Proven))
            .map(|t| t.amount as u128)
            .sum()
    }

    pub fn count_with_status(&self, status: CrossStatus) -> usize {
        self.txs.values().filter(|t| t.status == status).count()
    }
}
