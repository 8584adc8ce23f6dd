//! Domain data model shared by every other module: nodes, transactions,
//! shard states, process blocks, votes and control blocks.
//!
//! Everything here is an immutable value type; mutation happens only through
//! functional update (`apply_block` returns a fresh state). Hashes are
//! SHA-256 over a canonical little-endian, length-prefixed field encoding so
//! that identical inputs produce bit-identical hashes on every platform.
//! The byte layouts are documented in `docs/FORMATS.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type NodeId = u32;
pub type ShardIndex = u32;
pub type Epoch = u32;

/// 256-bit digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hash256(pub [u8; 32]);

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

impl Hash256 {
    pub fn zero() -> Self {
        Hash256([0; 32])
    }
}

/// 160-bit opaque wallet address. Balances are kept 64-bit so long synthetic
/// workloads cannot overflow them.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address(pub [u8; 20]);

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..5] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

/// Simulated signature: a keyed digest bound to the signing node. The
/// adversary model never forges, so this stands in for a real scheme; the
/// [`SignatureScheme`] trait is the seam where a cryptographic one plugs in.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Authenticator(pub [u8; 32]);

impl fmt::Debug for Authenticator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "auth:")?;
        for b in &self.0[..4] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

pub trait SignatureScheme {
    fn sign(&self, node: NodeId, message: &[u8]) -> Authenticator;
    fn verify(&self, node: NodeId, message: &[u8], auth: &Authenticator) -> bool;
}

/// Default scheme: SHA-256 over (per-node secret || message).
#[derive(Debug, Clone)]
pub struct SimulatedSigner {
    domain: u64,
}

impl SimulatedSigner {
    pub fn new(domain: u64) -> Self {
        SimulatedSigner { domain }
    }

    fn secret(&self, node: NodeId) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"node-secret");
        h.update(self.domain.to_le_bytes());
        h.update(node.to_le_bytes());
        h.finalize().into()
    }
}

impl SignatureScheme for SimulatedSigner {
    fn sign(&self, node: NodeId, message: &[u8]) -> Authenticator {
        let mut h = Sha256::new();
        h.update(self.secret(node));
        h.update(message);
        Authenticator(h.finalize().into())
    }

    fn verify(&self, node: NodeId, message: &[u8], auth: &Authenticator) -> bool {
        self.sign(node, message) == *auth
    }
}

/// Hashes a canonical encoding.
pub fn digest(bytes: &[u8]) -> Hash256 {
    Hash256(Sha256::digest(bytes).into())
}

/// Node identity and standing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    /// Index in the bootstrap random sequence C.
    pub rank: u32,
    pub process_shard: ShardIndex,
    pub control_shard: ShardIndex,
    /// Abstract proof-of-stake weight.
    pub stake: u64,
    pub expelled: bool,
    /// Epochs at which the node was marked as a violated node.
    pub violation_epochs: Vec<Epoch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxKind {
    Intra,
    CrossLeg1,
    CrossLeg2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: Hash256,
    pub sender: Address,
    pub recipient: Address,
    pub amount: u64,
    /// Distinguishes otherwise-identical transfers; part of the id.
    pub nonce: u64,
    pub kind: TxKind,
    pub signature: Authenticator,
    /// Hash of the paired cross-shard leg, when `kind` is a cross leg.
    pub cross_link: Option<Hash256>,
}

impl Transaction {
    /// Canonical byte encoding (see docs/FORMATS.md). The `id` field is not
    /// part of the encoding: it IS the digest of the encoding.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(96);
        out.extend_from_slice(b"tx\x00");
        out.extend_from_slice(&self.sender.0);
        out.extend_from_slice(&self.recipient.0);
        out.extend_from_slice(&self.amount.to_le_bytes());
        out.extend_from_slice(&self.nonce.to_le_bytes());
        out.push(match self.kind {
            TxKind::Intra => 0,
            TxKind::CrossLeg1 => 1,
            TxKind::CrossLeg2 => 2,
        });
        match &self.cross_link {
            None => out.push(0),
            Some(h) => {
                out.push(1);
                out.extend_from_slice(&h.0);
            }
        }
        out
    }

    /// Content digest; equals `id` for an untampered transaction.
    pub fn content_hash(&self) -> Hash256 {
        digest(&self.canonical_bytes())
    }

    /// Builds a transaction, filling in the id from the canonical encoding
    /// and signing it with the sender node's key.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        sender: Address,
        recipient: Address,
        amount: u64,
        nonce: u64,
        kind: TxKind,
        cross_link: Option<Hash256>,
        signer_node: NodeId,
        scheme: &dyn SignatureScheme,
    ) -> Transaction {
        let mut tx = Transaction {
            id: Hash256::zero(),
            sender,
            recipient,
            amount,
            nonce,
            kind,
            signature: Authenticator([0; 32]),
            cross_link,
        };
        tx.id = tx.content_hash();
        tx.signature = scheme.sign(signer_node, &tx.id.0);
        tx
    }
}

/// Per-process-shard balances snapshot. Blocks link to states rather than to
/// previous blocks, so only (latest state, failed block) ever needs syncing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardState {
    pub shard: ShardIndex,
    pub epoch: Epoch,
    pub balances: BTreeMap<Address, u64>,
    pub state_hash: Hash256,
    pub size_bytes: u64,
}

impl ShardState {
    pub fn genesis(shard: ShardIndex, balances: BTreeMap<Address, u64>, size_bytes: u64) -> Self {
        let mut s = ShardState {
            shard,
            epoch: 0,
            balances,
            state_hash: Hash256::zero(),
            size_bytes,
        };
        s.state_hash = s.compute_hash();
        s
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"st\x00");
        out.extend_from_slice(&self.shard.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(self.balances.len() as u64).to_le_bytes());
        for (addr, bal) in &self.balances {
            out.extend_from_slice(&addr.0);
            out.extend_from_slice(&bal.to_le_bytes());
        }
        out
    }

    pub fn compute_hash(&self) -> Hash256 {
        digest(&self.canonical_bytes())
    }

    pub fn total_balance(&self) -> u128 {
        self.balances.values().map(|v| *v as u128).sum()
    }
}

/// Block payload: real transactions, or a synthetic descriptor used by large
/// liveness runs where per-transaction semantics are irrelevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlockPayload {
    Transactions(Vec<Transaction>),
    Synthetic { tx_count: u32, valid: bool },
}

impl BlockPayload {
    pub fn tx_count(&self) -> u32 {
        match self {
            BlockPayload::Transactions(txs) => txs.len() as u32,
            BlockPayload::Synthetic { tx_count, .. } => *tx_count,
        }
    }
}

/// First-layer block proposed inside a process shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessBlock {
    pub shard: ShardIndex,
    pub epoch: Epoch,
    pub parent_state_hash: Hash256,
    pub proposer: NodeId,
    pub payload: BlockPayload,
    pub merkle_root: Hash256,
}

impl ProcessBlock {
    pub fn new(
        shard: ShardIndex,
        epoch: Epoch,
        parent_state_hash: Hash256,
        proposer: NodeId,
        payload: BlockPayload,
    ) -> Self {
        let merkle_root = match &payload {
            BlockPayload::Transactions(txs) => merkle_root_of(txs),
            BlockPayload::Synthetic { tx_count, valid } => {
                let mut enc = Vec::new();
                enc.extend_from_slice(b"syn");
                enc.extend_from_slice(&shard.to_le_bytes());
                enc.extend_from_slice(&epoch.to_le_bytes());
                enc.extend_from_slice(&parent_state_hash.0);
                enc.extend_from_slice(&tx_count.to_le_bytes());
                enc.push(*valid as u8);
                digest(&enc)
            }
        };
        ProcessBlock {
            shard,
            epoch,
            parent_state_hash,
            proposer,
            payload,
            merkle_root,
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"pb\x00");
        out.extend_from_slice(&self.shard.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.parent_state_hash.0);
        out.extend_from_slice(&self.proposer.to_le_bytes());
        out.extend_from_slice(&self.merkle_root.0);
        out.extend_from_slice(&(self.payload.tx_count() as u64).to_le_bytes());
        out
    }

    pub fn block_hash(&self) -> Hash256 {
        digest(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoteValue {
    Approve,
    Reject,
}

/// A phase-one vote as disseminated through the broadcast layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub voter: NodeId,
    pub shard: ShardIndex,
    pub epoch: Epoch,
    pub block_hash: Hash256,
    pub value: VoteValue,
    pub authenticator: Authenticator,
}

/// Per-member outcome in the agreed vote-set. `Silent` is an explicit agreed
/// value: everyone must reach consensus on whether a node voted at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoteOutcome {
    Approve,
    Reject,
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

/// Verdict entry a control block carries for one governed process shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EntryVerdict {
    UnanimousPass {
        vote_signatures: Vec<(NodeId, Authenticator)>,
    },
    Failed {
        /// Hash of the failed block; zero when the leader never proposed.
        failed_block_hash: Hash256,
        leader_decision: Decision,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub process_shard: ShardIndex,
    pub verdict: EntryVerdict,
}

/// Second-layer block finalizing one epoch of every governed process shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBlock {
    pub control_shard: ShardIndex,
    pub epoch: Epoch,
    pub proposer: NodeId,
    pub entries: Vec<ControlEntry>,
    pub expulsions: Vec<NodeId>,
    pub violations: Vec<NodeId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BlockError {
    #[error("block parent state {block_parent:?} does not match state {state_hash:?}")]
    ParentMismatch {
        block_parent: Hash256,
        state_hash: Hash256,
    },
    #[error("invalid block: transaction {tx:?} {reason}")]
    InvalidTransaction { tx: Hash256, reason: TxReason },
    #[error("transaction {0:?} absent from block")]
    AbsentTransaction(Hash256),
    #[error("cannot apply a synthetic payload to a balance state")]
    SyntheticPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxReason {
    Overspend,
    BadSignature,
    UnknownSender,
    DoubleSpend,
    BalanceOverflow,
}

impl fmt::Display for TxReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TxReason::Overspend => "overspend",
            TxReason::BadSignature => "bad signature",
            TxReason::UnknownSender => "unknown sender",
            TxReason::DoubleSpend => "double spend",
            TxReason::BalanceOverflow => "balance overflow",
        };
        f.write_str(s)
    }
}

/// The external validity oracle g1: decides whether one transaction is
/// acceptable against a running view of balances. Pluggable so tests can
/// substitute stricter or broken validators.
pub trait TxValidator {
    fn validate(
        &self,
        running: &BTreeMap<Address, u64>,
        seen_ids: &BTreeSet<Hash256>,
        tx: &Transaction,
    ) -> Result<(), TxReason>;
}

/// Default validator: transaction integrity (id must match content), balance
/// sufficiency for deducting kinds, and in-block double-spend rejection.
#[derive(Debug, Clone, Default)]
pub struct BalanceValidator;

impl TxValidator for BalanceValidator {
    fn validate(
        &self,
        running: &BTreeMap<Address, u64>,
        seen_ids: &BTreeSet<Hash256>,
        tx: &Transaction,
    ) -> Result<(), TxReason> {
        if tx.content_hash() != tx.id {
            return Err(TxReason::BadSignature);
        }
        if seen_ids.contains(&tx.id) {
            return Err(TxReason::DoubleSpend);
        }
        // Deposit-only legs do not touch the sender's local balance.
        if tx.kind != TxKind::CrossLeg2 {
            let have = running.get(&tx.sender).copied().unwrap_or(0);
            if have < tx.amount {
                return Err(TxReason::Overspend);
            }
        }
        Ok(())
    }
}

/// Applies a block to a state, returning the successor state. The input
/// state is untouched; rejected blocks simply never get applied, leaving the
/// state as the epoch's fixpoint.
pub fn apply_block(
    state: &ShardState,
    block: &ProcessBlock,
    g1: &dyn TxValidator,
) -> Result<ShardState, BlockError> {
    if block.parent_state_hash != state.state_hash {
        return Err(BlockError::ParentMismatch {
            block_parent: block.parent_state_hash,
            state_hash: state.state_hash,
        });
    }
    let txs = match &block.payload {
        BlockPayload::Transactions(txs) => txs,
        BlockPayload::Synthetic { .. } => return Err(BlockError::SyntheticPayload),
    };
    let mut balances = state.balances.clone();
    let mut seen = BTreeSet::new();
    for tx in txs {
        g1.validate(&balances, &seen, tx)
            .map_err(|reason| BlockError::InvalidTransaction { tx: tx.id, reason })?;
        seen.insert(tx.id);
        if tx.kind != TxKind::CrossLeg2 {
            *balances.get_mut(&tx.sender).expect("validated sender") -= tx.amount;
        }
        if tx.kind != TxKind::CrossLeg1 {
            let slot = balances.entry(tx.recipient).or_insert(0);
            *slot = slot
                .checked_add(tx.amount)
                .ok_or(BlockError::InvalidTransaction {
                    tx: tx.id,
                    reason: TxReason::BalanceOverflow,
                })?;
        }
    }
    let mut next = ShardState {
        shard: state.shard,
        epoch: block.epoch,
        balances,
        state_hash: Hash256::zero(),
        size_bytes: state.size_bytes,
    };
    next.state_hash = next.compute_hash();
    Ok(next)
}

// ---------------------------------------------------------------------------
// Merkle tree over transaction content hashes.
// ---------------------------------------------------------------------------

/// Sibling hash plus its side: `sibling_on_left` means the sibling sits left
/// of the running hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MerkleStep {
    pub sibling: Hash256,
    pub sibling_on_left: bool,
}

pub type MerkleProof = Vec<MerkleStep>;

fn merkle_parent(left: &Hash256, right: &Hash256) -> Hash256 {
    let mut h = Sha256::new();
    h.update(b"mk\x01");
    h.update(left.0);
    h.update(right.0);
    Hash256(h.finalize().into())
}

fn leaf_hashes(txs: &[Transaction]) -> Vec<Hash256> {
    txs.iter().map(|tx| tx.content_hash()).collect()
}

/// Root of the binary hash tree over the transactions' content hashes. Odd
/// levels duplicate the last node. An empty list hashes to a fixed sentinel.
pub fn merkle_root_of(txs: &[Transaction]) -> Hash256 {
    merkle_root_of_leaves(leaf_hashes(txs))
}

fn merkle_root_of_leaves(mut level: Vec<Hash256>) -> Hash256 {
    if level.is_empty() {
        return digest(b"mk-empty");
    }
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        level = level
            .chunks_exact(2)
            .map(|pair| merkle_parent(&pair[0], &pair[1]))
            .collect();
    }
    level[0]
}

/// Membership proof for `tx_id` inside `block`.
pub fn merkle_proof(block: &ProcessBlock, tx_id: Hash256) -> Result<MerkleProof, BlockError> {
    let txs = match &block.payload {
        BlockPayload::Transactions(txs) => txs,
        BlockPayload::Synthetic { .. } => return Err(BlockError::SyntheticPayload),
    };
    let mut index = txs
        .iter()
        .position(|tx| tx.id == tx_id)
        .ok_or(BlockError::AbsentTransaction(tx_id))?;
    let mut level = leaf_hashes(txs);
    let mut proof = Vec::new();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().unwrap());
        }
        let sibling_index = index ^ 1;
        proof.push(MerkleStep {
            sibling: level[sibling_index],
            sibling_on_left: sibling_index < index,
        });
        level = level
            .chunks_exact(2)
            .map(|pair| merkle_parent(&pair[0], &pair[1]))
            .collect();
        index /= 2;
    }
    Ok(proof)
}

/// Recomputes the path from the transaction's content and compares with the
/// committed root, so any tampering with the transaction fails verification.
pub fn verify_merkle(root: Hash256, tx: &Transaction, proof: &MerkleProof) -> bool {
    let mut acc = tx.content_hash();
    for step in proof {
        acc = if step.sibling_on_left {
            merkle_parent(&step.sibling, &acc)
        } else {
            merkle_parent(&acc, &step.sibling)
        };
    }
    acc == root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(b: u8) -> Address {
        Address([b; 20])
    }

    fn scheme() -> SimulatedSigner {
        SimulatedSigner::new(7)
    }

    fn transfer(from: u8, to: u8, amount: u64) -> Transaction {
        Transaction::build(
            addr(from),
            addr(to),
            amount,
            0,
            TxKind::Intra,
            None,
            from as NodeId,
            &scheme(),
        )
    }

    fn state_with(pairs: &[(u8, u64)]) -> ShardState {
        let balances = pairs.iter().map(|(a, v)| (addr(*a), *v)).collect();
        ShardState::genesis(0, balances, 256 * 1024)
    }

    #[test]
    fn apply_single_transfer() {
        let s0 = state_with(&[(1, 10)]);
        let block = ProcessBlock::new(
            0,
            1,
            s0.state_hash,
            1,
            BlockPayload::Transactions(vec![transfer(1, 2, 4)]),
        );
        let s1 = apply_block(&s0, &block, &BalanceValidator).unwrap();
        assert_eq!(s1.balances[&addr(1)], 6);
        assert_eq!(s1.balances[&addr(2)], 4);
        assert_eq!(s1.epoch, 1);
        // Input state untouched.
        assert_eq!(s0.balances[&addr(1)], 10);
    }

    #[test]
    fn apply_empty_block_changes_hash_only() {
        let s0 = state_with(&[(1, 10)]);
        let block = ProcessBlock::new(0, 1, s0.state_hash, 1, BlockPayload::Transactions(vec![]));
        let s1 = apply_block(&s0, &block, &BalanceValidator).unwrap();
        assert_eq!(s1.balances, s0.balances);
        assert_eq!(s1.epoch, 1);
        assert_ne!(s1.state_hash, s0.state_hash);
    }

    #[test]
    fn overspend_is_rejected_with_offending_tx() {
        let s0 = state_with(&[(1, 3)]);
        let bad = transfer(1, 2, 5);
        let bad_id = bad.id;
        let block = ProcessBlock::new(
            0,
            1,
            s0.state_hash,
            1,
            BlockPayload::Transactions(vec![bad]),
        );
        let err = apply_block(&s0, &block, &BalanceValidator).unwrap_err();
        assert_eq!(
            err,
            BlockError::InvalidTransaction {
                tx: bad_id,
                reason: TxReason::Overspend
            }
        );
    }

    #[test]
    fn in_block_sequence_is_checked() {
        // 6 then 6 out of 10 must fail on the second transfer.
        let s0 = state_with(&[(1, 10)]);
        let a = transfer(1, 2, 6);
        let b = Transaction::build(addr(1), addr(3), 6, 0, TxKind::Intra, None, 1, &scheme());
        let block = ProcessBlock::new(
            0,
            1,
            s0.state_hash,
            1,
            BlockPayload::Transactions(vec![a, b]),
        );
        let err = apply_block(&s0, &block, &BalanceValidator).unwrap_err();
        assert!(matches!(
            err,
            BlockError::InvalidTransaction {
                reason: TxReason::Overspend,
                ..
            }
        ));
    }

    #[test]
    fn parent_mismatch_is_rejected() {
        let s0 = state_with(&[(1, 10)]);
        let block = ProcessBlock::new(0, 1, Hash256::zero(), 1, BlockPayload::Transactions(vec![]));
        assert!(matches!(
            apply_block(&s0, &block, &BalanceValidator),
            Err(BlockError::ParentMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_state_hash() {
        let a = state_with(&[(1, 10), (2, 5)]);
        let b = state_with(&[(2, 5), (1, 10)]);
        assert_eq!(a.state_hash, b.state_hash);
    }

    #[test]
    fn single_tx_merkle_root_is_leaf() {
        let tx = transfer(1, 2, 1);
        let block = ProcessBlock::new(
            0,
            1,
            Hash256::zero(),
            1,
            BlockPayload::Transactions(vec![tx.clone()]),
        );
        assert_eq!(block.merkle_root, tx.content_hash());
        let proof = merkle_proof(&block, tx.id).unwrap();
        assert!(proof.is_empty());
        assert!(verify_merkle(block.merkle_root, &tx, &proof));
    }

    #[test]
    fn four_tx_proof_has_length_two_and_verifies() {
        let txs: Vec<Transaction> = (0..4).map(|i| transfer(i + 1, i + 2, 1)).collect();
        let block = ProcessBlock::new(
            0,
            1,
            Hash256::zero(),
            1,
            BlockPayload::Transactions(txs.clone()),
        );
        let proof = merkle_proof(&block, txs[1].id).unwrap();
        assert_eq!(proof.len(), 2);
        assert!(verify_merkle(block.merkle_root, &txs[1], &proof));
    }

    #[test]
    fn tampered_amount_fails_verification() {
        let txs: Vec<Transaction> = (0..4).map(|i| transfer(i + 1, i + 2, 10)).collect();
        let block = ProcessBlock::new(
            0,
            1,
            Hash256::zero(),
            1,
            BlockPayload::Transactions(txs.clone()),
        );
        let proof = merkle_proof(&block, txs[2].id).unwrap();
        let mut tampered = txs[2].clone();
        tampered.amount = 9999;
        assert!(!verify_merkle(block.merkle_root, &tampered, &proof));
    }

    #[test]
    fn absent_transaction_yields_error() {
        let txs: Vec<Transaction> = (0..3).map(|i| transfer(i + 1, i + 2, 1)).collect();
        let block = ProcessBlock::new(0, 1, Hash256::zero(), 1, BlockPayload::Transactions(txs));
        let ghost = transfer(9, 8, 1);
        assert_eq!(
            merkle_proof(&block, ghost.id).unwrap_err(),
            BlockError::AbsentTransaction(ghost.id)
        );
    }

    #[test]
    fn simulated_signatures_round_trip() {
        let s = scheme();
        let auth = s.sign(3, b"hello");
        assert!(s.verify(3, b"hello", &auth));
        assert!(!s.verify(4, b"hello", &auth));
        assert!(!s.verify(3, b"hellp", &auth));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Any accepted sequence of intra-shard blocks conserves the
            /// total balance, and replaying it is bit-identical.
            #[test]
            fn intra_blocks_conserve_total(
                transfers in proptest::collection::vec((0u8..6, 0u8..6, 1u64..4), 1..40),
            ) {
                let mut state = state_with(&[(0, 50), (1, 50), (2, 50), (3, 50), (4, 50), (5, 50)]);
                let total = state.total_balance();
                let mut epoch = 1;
                for chunk in transfers.chunks(5) {
                    let txs: Vec<Transaction> = chunk
                        .iter()
                        .enumerate()
                        .map(|(i, (a, b, amt))| {
                            Transaction::build(
                                addr(*a),
                                addr(*b),
                                *amt,
                                (epoch as u64) << 8 | i as u64,
                                TxKind::Intra,
                                None,
                                *a as NodeId,
                                &scheme(),
                            )
                        })
                        .collect();
                    let block = ProcessBlock::new(
                        0,
                        epoch,
                        state.state_hash,
                        1,
                        BlockPayload::Transactions(txs),
                    );
                    match apply_block(&state, &block, &BalanceValidator) {
                        Ok(next) => {
                            prop_assert_eq!(next.total_balance(), total);
                            let replay = apply_block(&state, &block, &BalanceValidator).unwrap();
                            prop_assert_eq!(&replay.state_hash, &next.state_hash);
                            state = next;
                        }
                        Err(BlockError::InvalidTransaction { .. }) => {
                            // Rejected blocks leave the state untouched.
                        }
                        Err(other) => return Err(TestCaseError::fail(format!("{other}"))),
                    }
                    epoch += 1;
                }
            }
        }
    }
}
