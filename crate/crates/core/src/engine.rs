//! The protocol engine: bootstrapping, the two-phase epoch loop, the
//! violation/expulsion ledger and state evolution.
//!
//! Each epoch runs phase one in every process shard (propose, vote,
//! disseminate votes to the whole control shard), then phase two in every
//! control shard (finalize verdicts, judge failed blocks, expel). The epoch
//! clock is virtual: phase one costs `T1`, phase two costs the per-control
//! `T2 = lambda * (governed - Ns + 1)`, and the system advances in lockstep
//! at the slowest control shard.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::adversary::{AdversaryPlan, EpochActions};
use crate::bb::{
    agreed_vote_set_analytic, combined_message_count_detailed, run_combined_simulated,
    AgreedVoteSet, BbAdversary, BbMessage, BroadcastBehavior, CombinedRound, RelayBehavior,
};
use crate::crossshard::CrossShardManager;
use crate::model::{
    apply_block, digest, Address, BalanceValidator, BlockPayload, ControlBlock, ControlEntry,
    Decision, EntryVerdict, Epoch, Hash256, NodeId, NodeRecord, ProcessBlock, ShardIndex,
    ShardState, SignatureScheme, SimulatedSigner, Transaction, TxKind, VoteOutcome,
};
use crate::params::{t2_bound, ParamError, ProtocolParams};
use crate::rng::{Rng, SplitMix64};
use crate::simnet::{BandwidthLedger, LatencyModel, NetError, SimNet};

const VOTE_BYTES: u64 = 100;
const CONTROL_ENTRY_BYTES: u64 = 256;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("control shard {control_shard} accepted no block after {rotations} rotations at epoch {epoch}")]
    ControlStalled {
        control_shard: ShardIndex,
        epoch: Epoch,
        rotations: u32,
    },
    #[error("honest members disagree on the vote set of shard {shard} at epoch {epoch}")]
    AgreementViolation { shard: ShardIndex, epoch: Epoch },
}

/// Per-node shard indices from the bootstrap assignment algorithm.
///
/// `index1 = floor(rank / Np)`, `index2 = floor(index1 / (Nc / Np))` with a
/// real-valued ratio (computed exactly as `floor(index1 * Np / Nc)`), then
/// remainder nodes fold into the last control shard, and — when `Np` does
/// not divide `N` — into the last process shard.
pub fn shard_indices(c_index: u32, n: u32, np: u32, nc: u32) -> (ShardIndex, ShardIndex) {
    let mut index1 = c_index / np;
    let mut index2 = ((index1 as u64 * np as u64) / nc as u64) as u32;
    if c_index >= (n / nc) * nc {
        index2 = index2.saturating_sub(1);
        if n % np != 0 {
            index1 = index1.min(n / np - 1);
        }
    }
    (index1, index2)
}

/// The bootstrap output: the random sequence C and both shard maps.
#[derive(Debug, Clone)]
pub struct ShardAssignment {
    /// rank -> node id (the random sequence C).
    pub sequence: Vec<NodeId>,
    /// node id -> (process shard, control shard). Node ids must be `0..N`.
    pub placements: Vec<(ShardIndex, ShardIndex)>,
    /// node id -> rank in C.
    pub ranks: Vec<u32>,
    /// Rank-ordered members per process shard.
    pub process_members: Vec<Vec<NodeId>>,
    /// Rank-ordered members per control shard.
    pub control_members: Vec<Vec<NodeId>>,
    /// Process shard -> its governing control shard.
    pub process_to_control: Vec<ShardIndex>,
}

/// Assigns every node to exactly one process shard and its governing
/// control shard, using a seeded permutation in place of the distributed
/// random beacon.
pub fn bootstrap(
    node_ids: &[NodeId],
    seed: &[u8; 32],
    np: u32,
    nc: u32,
) -> Result<ShardAssignment, EngineError> {
    let n = node_ids.len() as u32;
    if np < 1 {
        return Err(EngineError::Config("n_p must be >= 1".into()));
    }
    if nc < np {
        return Err(EngineError::Config("n_c must be >= n_p".into()));
    }
    if n < nc {
        return Err(EngineError::Config(format!(
            "need at least n_c = {nc} nodes, got {n}"
        )));
    }
    let mut sequence = node_ids.to_vec();
    Rng::from_seed_bytes(seed).shuffle(&mut sequence);

    let beta = (n / np) as usize;
    let lambda = (n / nc) as usize;
    let mut placements = vec![(0, 0); node_ids.len()];
    let mut ranks = vec![0u32; node_ids.len()];
    let mut process_members = vec![Vec::new(); beta];
    let mut control_members = vec![Vec::new(); lambda];
    let mut process_to_control = vec![0; beta];
    for (rank, &node) in sequence.iter().enumerate() {
        let (ps, cs) = shard_indices(rank as u32, n, np, nc);
        placements[node as usize] = (ps, cs);
        ranks[node as usize] = rank as u32;
        process_members[ps as usize].push(node);
        control_members[cs as usize].push(node);
        process_to_control[ps as usize] = cs;
    }
    Ok(ShardAssignment {
        sequence,
        placements,
        ranks,
        process_members,
        control_members,
        process_to_control,
    })
}

/// How the one-mark-per-window rule is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationWindow {
    /// A second mark within the trailing `tau` epochs expels.
    Sliding,
    /// Marks reset at every `tau`-aligned boundary.
    Tumbling,
}

#[derive(Debug)]
pub struct ViolationLedger {
    window: ViolationWindow,
    tau: u32,
    pub marks: BTreeMap<NodeId, Vec<Epoch>>,
}

pub enum MarkResult {
    FirstMark,
    Expelled,
}

impl ViolationLedger {
    pub fn new(window: ViolationWindow, tau: u32) -> Self {
        ViolationLedger {
            window,
            tau,
            marks: BTreeMap::new(),
        }
    }

    /// Records a silence mark; a second mark inside the window expels.
    pub fn record_silence(&mut self, node: NodeId, epoch: Epoch) -> MarkResult {
        let marks = self.marks.entry(node).or_default();
        let repeat = marks.iter().any(|&m| match self.window {
            ViolationWindow::Sliding => epoch - m <= self.tau - 1,
            ViolationWindow::Tumbling => m / self.tau == epoch / self.tau,
        });
        marks.push(epoch);
        if repeat {
            MarkResult::Expelled
        } else {
            MarkResult::FirstMark
        }
    }
}

/// Transaction regime for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum TxMode {
    /// Blocks carry a transaction count only; states evolve as hash chains.
    Synthetic,
    /// Blocks carry real signed transactions over per-shard accounts.
    Full {
        accounts_per_shard: u32,
        genesis_balance: u64,
    },
}

/// Whether vote dissemination materializes every broadcast message or uses
/// the closed-form outcome (identical by construction; the closed form keeps
/// five-thousand-node runs fast).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbMode {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub params: ProtocolParams,
    pub seed: u64,
    pub latency: LatencyModel,
    pub window: ViolationWindow,
    pub tx_mode: TxMode,
    pub bb_mode: BbMode,
    /// Synthetic intra-shard transfers the leader packs per block (Full mode).
    pub intra_tx_per_block: u32,
    /// Cross-shard transactions injected per shard per epoch, as a fraction
    /// of `intra_tx_per_block` (Full mode).
    pub cross_tx_fraction: f64,
}

impl EngineConfig {
    pub fn synthetic(params: ProtocolParams, seed: u64) -> Self {
        EngineConfig {
            params,
            seed,
            latency: LatencyModel::default(),
            window: ViolationWindow::Sliding,
            tx_mode: TxMode::Synthetic,
            bb_mode: BbMode::Analytic,
            intra_tx_per_block: 0,
            cross_tx_fraction: 0.0,
        }
    }
}

/// Phase-one + phase-two outcome for one process shard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessVerdict {
    UnanimousPass,
    FailedAccepted,
    FailedRejected,
}

#[derive(Debug, Clone)]
pub struct ProcessShardEpoch {
    pub shard: ShardIndex,
    pub verdict: ProcessVerdict,
    /// Members whose agreed vote-set entry is Silent.
    pub silent: Vec<NodeId>,
    /// Members whose agreed vote-set entry is Reject.
    pub rejecting: Vec<NodeId>,
    pub member_count: u32,
    pub tx_committed: u32,
    pub state_hash_after: Hash256,
}

#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub epoch: Epoch,
    pub shards: Vec<ProcessShardEpoch>,
    pub control_blocks: Vec<ControlBlock>,
    pub expelled: Vec<NodeId>,
    pub violated: Vec<NodeId>,
    pub t1_s: f64,
    /// Per-control-shard phase-two bounds; the epoch takes the maximum.
    pub t2_per_control: Vec<f64>,
    pub t2_used_s: f64,
    pub epoch_len_s: f64,
    pub bb_messages: u64,
    pub control_rotations: u32,
    pub tx_committed: u64,
    pub storage_bytes: u64,
    pub upload_bytes_max_node: u64,
}

enum Phase1Verdict {
    Unanimous {
        block: ProcessBlock,
    },
    Failed {
        block: Option<ProcessBlock>,
        block_valid: bool,
    },
}

pub struct Engine {
    pub cfg: EngineConfig,
    pub assignment: ShardAssignment,
    pub nodes: Vec<NodeRecord>,
    pub states: Vec<ShardState>,
    pub violations: ViolationLedger,
    pub cross: CrossShardManager,
    pub expelled: BTreeSet<NodeId>,
    /// Merkle roots of accepted blocks, per process shard.
    pub accepted_roots: Vec<BTreeSet<Hash256>>,
    pub ledger: BandwidthLedger,
    epoch: Epoch,
    signer: SimulatedSigner,
    /// Same-shard cross submissions routed back as ordinary transfers.
    intra_queue: BTreeMap<ShardIndex, Vec<Transaction>>,
    address_book: Vec<Vec<Address>>,
    next_user_nonce: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Self, EngineError> {
        cfg.params.validate().map_err(EngineError::Param)?;
        let n = cfg.params.n;
        let node_ids: Vec<NodeId> = (0..n).collect();
        let mut seed_bytes = [0u8; 32];
        seed_bytes.copy_from_slice(
            &digest(&[b"bootstrap".as_slice(), &cfg.seed.to_le_bytes()].concat()).0,
        );
        let assignment = bootstrap(&node_ids, &seed_bytes, cfg.params.np, cfg.params.nc)?;
        let nodes = node_ids
            .iter()
            .map(|&id| NodeRecord {
                id,
                rank: assignment.ranks[id as usize],
                process_shard: assignment.placements[id as usize].0,
                control_shard: assignment.placements[id as usize].1,
                stake: 1,
                expelled: false,
                violation_epochs: Vec::new(),
            })
            .collect();
        let beta = assignment.process_members.len();
        let mut address_book = vec![Vec::new(); beta];
        let mut states = Vec::with_capacity(beta);
        for shard in 0..beta {
            let mut balances = BTreeMap::new();
            if let TxMode::Full {
                accounts_per_shard,
                genesis_balance,
            } = cfg.tx_mode
            {
                for i in 0..accounts_per_shard {
                    let h = digest(
                        &[
                            b"acct".as_slice(),
                            &(shard as u32).to_le_bytes(),
                            &i.to_le_bytes(),
                        ]
                        .concat(),
                    );
                    let mut a = [0u8; 20];
                    a.copy_from_slice(&h.0[..20]);
                    let addr = Address(a);
                    address_book[shard].push(addr);
                    balances.insert(addr, genesis_balance);
                }
            }
            states.push(ShardState::genesis(
                shard as ShardIndex,
                balances,
                cfg.params.state_bytes,
            ));
        }
        let tau = cfg.params.tau;
        let window = cfg.window;
        let seed = cfg.seed;
        Ok(Engine {
            assignment,
            nodes,
            states,
            violations: ViolationLedger::new(window, tau),
            cross: CrossShardManager::new(),
            expelled: BTreeSet::new(),
            accepted_roots: vec![BTreeSet::new(); beta],
            ledger: BandwidthLedger::new(n as usize),
            epoch: 0,
            signer: SimulatedSigner::new(seed),
            intra_queue: BTreeMap::new(),
            address_book,
            next_user_nonce: 0,
            cfg,
        })
    }

    pub fn current_epoch(&self) -> Epoch {
        self.epoch
    }

    pub fn signer(&self) -> &SimulatedSigner {
        &self.signer
    }

    pub fn shard_of_address(&self, addr: &Address) -> Option<ShardIndex> {
        self.address_book
            .iter()
            .position(|book| book.contains(addr))
            .map(|i| i as ShardIndex)
    }

    /// The `index`-th account of a shard (Full mode).
    pub fn address_of(&self, shard: ShardIndex, index: usize) -> Address {
        self.address_book[shard as usize][index]
    }

    /// Current (non-expelled) members of a process shard, rank order.
    pub fn live_process_members(&self, shard: ShardIndex) -> Vec<NodeId> {
        self.assignment.process_members[shard as usize]
            .iter()
            .copied()
            .filter(|id| !self.expelled.contains(id))
            .collect()
    }

    /// Current (non-expelled) members of a control shard, rank order.
    pub fn live_control_members(&self, shard: ShardIndex) -> Vec<NodeId> {
        self.assignment.control_members[shard as usize]
            .iter()
            .copied()
            .filter(|id| !self.expelled.contains(id))
            .collect()
    }

    fn det_draw(&self, label: &str, a: u64, b: u64) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in label.as_bytes() {
            h ^= *byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        let mut sm = SplitMix64(self.cfg.seed ^ h ^ a.rotate_left(17) ^ b.rotate_left(41));
        sm.next_u64()
    }

    /// Round-robin over rank-ordered live members, offset by a per-epoch
    /// seeded draw.
    fn phase1_leader(&self, shard: ShardIndex, members: &[NodeId]) -> NodeId {
        let offset = self.det_draw("p1-leader", self.epoch as u64, shard as u64) as usize;
        members[offset % members.len()]
    }

    /// Submits a user cross-shard transfer at the recipient's shard.
    pub fn submit_cross_transfer(
        &mut self,
        send_shard: ShardIndex,
        recv_shard: ShardIndex,
        sender: Address,
        recipient: Address,
        amount: u64,
    ) -> Result<(), EngineError> {
        let user = u32::from_le_bytes(
            digest(&[b"user".as_slice(), &sender.0].concat()).0[..4]
                .try_into()
                .unwrap(),
        );
        self.next_user_nonce += 1;
        let original = Transaction::build(
            sender,
            recipient,
            amount,
            self.next_user_nonce,
            TxKind::Intra,
            None,
            user,
            &self.signer,
        );
        match self.cross.handle_at_receive(
            &original,
            send_shard,
            recv_shard,
            user,
            &self.signer,
            self.epoch,
        ) {
            Ok(Some(intra)) => {
                self.intra_queue.entry(recv_shard).or_default().push(intra);
                Ok(())
            }
            Ok(None) => Ok(()),
            Err(e) => Err(EngineError::Config(format!("cross submission: {e}"))),
        }
    }

    fn inject_scheduled_cross(&mut self) -> Result<(), EngineError> {
        let TxMode::Full { .. } = self.cfg.tx_mode else {
            return Ok(());
        };
        let beta = self.states.len() as u32;
        if beta < 2 || self.cfg.cross_tx_fraction <= 0.0 {
            return Ok(());
        }
        let per_shard =
            (self.cfg.cross_tx_fraction * self.cfg.intra_tx_per_block as f64).round() as u32;
        for recv in 0..beta {
            let mut rng =
                Rng::from_seed(self.det_draw("cross-inject", self.epoch as u64, recv as u64));
            for _ in 0..per_shard {
                let send = {
                    let s = rng.below((beta - 1) as u64) as u32;
                    if s >= recv {
                        s + 1
                    } else {
                        s
                    }
                };
                let sender = self.address_book[send as usize]
                    [rng.below(self.address_book[send as usize].len() as u64) as usize];
                let recipient = self.address_book[recv as usize]
                    [rng.below(self.address_book[recv as usize].len() as u64) as usize];
                let amount = 1 + rng.below(3);
                self.submit_cross_transfer(send, recv, sender, recipient, amount)?;
            }
        }
        Ok(())
    }

    fn build_block(&mut self, shard: ShardIndex, leader: NodeId, invalid: bool) -> ProcessBlock {
        let state = &self.states[shard as usize];
        let parent = state.state_hash;
        let next_epoch = self.epoch;
        match self.cfg.tx_mode {
            TxMode::Synthetic => ProcessBlock::new(
                shard,
                next_epoch,
                parent,
                leader,
                BlockPayload::Synthetic {
                    tx_count: self.cfg.params.tx_per_block,
                    valid: !invalid,
                },
            ),
            TxMode::Full { .. } => {
                let budget = self.cfg.params.tx_per_block as usize;
                let mut running = state.balances.clone();
                let mut txs: Vec<Transaction> = Vec::new();

                if invalid {
                    // An overspend the honest members must reject.
                    let victim = self.address_book[shard as usize][0];
                    let have = running.get(&victim).copied().unwrap_or(0);
                    txs.push(Transaction::build(
                        victim,
                        self.address_book[shard as usize]
                            [1 % self.address_book[shard as usize].len()],
                        have + 1,
                        next_epoch as u64,
                        TxKind::Intra,
                        None,
                        leader,
                        &self.signer,
                    ));
                }

                // Proven deposit legs first: they only credit.
                let roots = &self.accepted_roots;
                for leg2 in self.cross.take_leg2_for_block(
                    shard,
                    |s, r| roots[s as usize].contains(r),
                    budget.saturating_sub(txs.len()),
                ) {
                    txs.push(leg2.clone());
                }
                // Deduct legs, checked against the running view.
                let leg1s = {
                    let running_ref = &running;
                    self.cross.take_leg1_for_block(
                        shard,
                        |a| running_ref.get(a).copied().unwrap_or(0),
                        budget.saturating_sub(txs.len()),
                    )
                };
                for leg1 in leg1s {
                    *running.get_mut(&leg1.sender).expect("cross sender exists") -= leg1.amount;
                    txs.push(leg1);
                }
                // Same-shard cross submissions routed back as transfers.
                if let Some(queue) = self.intra_queue.remove(&shard) {
                    for tx in queue {
                        if txs.len() >= budget {
                            break;
                        }
                        let have = running.get(&tx.sender).copied().unwrap_or(0);
                        if have < tx.amount {
                            continue;
                        }
                        *running.get_mut(&tx.sender).unwrap() -= tx.amount;
                        *running.entry(tx.recipient).or_insert(0) += tx.amount;
                        txs.push(tx);
                    }
                }
                // Synthetic intra-shard traffic.
                let book = &self.address_book[shard as usize];
                if book.len() >= 2 {
                    let mut rng =
                        Rng::from_seed(self.det_draw("intra", self.epoch as u64, shard as u64));
                    for _ in 0..self.cfg.intra_tx_per_block.min((budget - txs.len()) as u32) {
                        let a = book[rng.below(book.len() as u64) as usize];
                        let b = book[rng.below(book.len() as u64) as usize];
                        if a == b {
                            continue;
                        }
                        let have = running.get(&a).copied().unwrap_or(0);
                        if have == 0 {
                            continue;
                        }
                        let amount = 1 + rng.below(have.min(3));
                        *running.get_mut(&a).unwrap() -= amount;
                        *running.entry(b).or_insert(0) += amount;
                        let user = u32::from_le_bytes(
                            digest(&[b"user".as_slice(), &a.0].concat()).0[..4]
                                .try_into()
                                .unwrap(),
                        );
                        let nonce = rng.next_u64();
                        txs.push(Transaction::build(
                            a,
                            b,
                            amount,
                            nonce,
                            TxKind::Intra,
                            None,
                            user,
                            &self.signer,
                        ));
                    }
                }
                ProcessBlock::new(
                    shard,
                    next_epoch,
                    parent,
                    leader,
                    BlockPayload::Transactions(txs),
                )
            }
        }
    }

    /// Honest validity judgment for a proposed block (g1 at the process
    /// level; phase two applies the same check as g2 plus the vote-set).
    fn block_is_valid(&self, shard: ShardIndex, block: &ProcessBlock) -> bool {
        match &block.payload {
            BlockPayload::Synthetic { valid, .. } => *valid,
            BlockPayload::Transactions(txs) => {
                // Deposit legs must carry a proof verified against an
                // accepted block of the sender's shard.
                for tx in txs {
                    if tx.kind == TxKind::CrossLeg2 {
                        let Some(leg1_id) = tx.cross_link else {
                            return false;
                        };
                        let ok = self.cross.txs.values().any(|t| {
                            t.leg1.id == leg1_id
                                && t.recv_shard == shard
                                && t.proof_root
                                    .map(|r| {
                                        self.accepted_roots[t.send_shard as usize].contains(&r)
                                    })
                                    .unwrap_or(false)
                                && t.proof
                                    .as_ref()
                                    .map(|p| {
                                        crate::model::verify_merkle(
                                            t.proof_root.unwrap(),
                                            &t.leg1,
                                            p,
                                        )
                                    })
                                    .unwrap_or(false)
                        });
                        if !ok {
                            return false;
                        }
                    }
                }
                apply_block(&self.states[shard as usize], block, &BalanceValidator).is_ok()
            }
        }
    }

    fn advance_state(&mut self, shard: ShardIndex, block: &ProcessBlock) {
        let next = match &block.payload {
            BlockPayload::Transactions(_) => {
                apply_block(&self.states[shard as usize], block, &BalanceValidator)
                    .expect("accepted block applies")
            }
            BlockPayload::Synthetic { .. } => {
                let prev = &self.states[shard as usize];
                let mut bytes = Vec::with_capacity(72);
                bytes.extend_from_slice(&prev.state_hash.0);
                bytes.extend_from_slice(&block.block_hash().0);
                bytes.extend_from_slice(&block.epoch.to_le_bytes());
                ShardState {
                    shard,
                    epoch: block.epoch,
                    balances: BTreeMap::new(),
                    state_hash: digest(&bytes),
                    size_bytes: prev.size_bytes,
                }
            }
        };
        self.accepted_roots[shard as usize].insert(block.merkle_root);
        self.cross.on_block_accepted(shard, block, block.epoch);
        self.states[shard as usize] = next;
    }

    /// Full-mesh bandwidth charge: each sender uploads `bytes` to every
    /// other group member.
    fn charge_mesh(&mut self, senders: &[NodeId], group: &[NodeId], bytes: u64) {
        if group.len() < 2 {
            return;
        }
        let g = group.len() as u64;
        let senders_set: BTreeSet<NodeId> = senders.iter().copied().collect();
        let a = senders.len() as u64;
        for &s in senders {
            self.ledger.uploaded[s as usize] += (g - 1) * bytes;
            self.ledger.epoch_uploaded[s as usize] += (g - 1) * bytes;
        }
        for &m in group {
            let received = a - senders_set.contains(&m) as u64;
            self.ledger.downloaded[m as usize] += received * bytes;
            self.ledger.epoch_downloaded[m as usize] += received * bytes;
        }
    }

    fn run_one_epoch(&mut self, actions: &EpochActions) -> Result<EpochOutcome, EngineError> {
        let epoch = self.epoch;
        let params = self.cfg.params.clone();
        self.inject_scheduled_cross()?;

        let beta = self.assignment.process_members.len();
        let lambda = self.assignment.control_members.len();

        // ---- Phase one: every process shard proposes and votes. ----
        let mut verdicts: Vec<Option<Phase1Verdict>> = Vec::with_capacity(beta);
        let mut vote_sets: Vec<AgreedVoteSet> = Vec::with_capacity(beta);
        let mut members_per_shard: Vec<Vec<NodeId>> = Vec::with_capacity(beta);
        let mut bb_messages: u64 = 0;

        for shard in 0..beta as ShardIndex {
            let members = self.live_process_members(shard);
            members_per_shard.push(members.clone());
            if members.is_empty() {
                verdicts.push(None);
                vote_sets.push(AgreedVoteSet::new());
                continue;
            }
            let control = self.assignment.process_to_control[shard as usize];
            let group = self.live_control_members(control);

            let leader = self.phase1_leader(shard, &members);
            let leader_silent = actions.silent.contains(&leader);
            let invalid = actions.invalid_proposal.contains(&leader);
            let block = if leader_silent {
                None
            } else {
                Some(self.build_block(shard, leader, invalid))
            };
            let block_valid = block
                .as_ref()
                .map(|b| self.block_is_valid(shard, b))
                .unwrap_or(false);

            // Block dissemination: leader to shard members.
            if block.is_some() {
                self.charge_mesh(&[leader], &members, params.block_bytes);
            }

            // Votes: silent members say nothing; everyone else votes its
            // honest judgment (no proposal within the bound reads as
            // reject, so liveness is still proven).
            let voters: Vec<(NodeId, Option<crate::model::VoteValue>)> = members
                .iter()
                .map(|&m| {
                    if actions.silent.contains(&m) {
                        (m, None)
                    } else if block.is_none() {
                        // No proposal arrived within the bound; voting
                        // reject on the null proposal still proves liveness.
                        (m, Some(crate::model::VoteValue::Reject))
                    } else if block_valid || (m == leader && invalid) {
                        // An adversarial proposer backs its own bad block.
                        (m, Some(crate::model::VoteValue::Approve))
                    } else {
                        (m, Some(crate::model::VoteValue::Reject))
                    }
                })
                .collect();
            let mut adv = BbAdversary::default();
            for (m, v) in &voters {
                if v.is_none() {
                    adv.broadcast.insert(*m, BroadcastBehavior::Silent);
                }
            }
            for member in &group {
                if actions.silent.contains(member) {
                    adv.relay.insert(*member, RelayBehavior::Silent);
                }
            }
            let round = CombinedRound {
                voters: voters.clone(),
                group: group.clone(),
            };

            let agreed = match self.cfg.bb_mode {
                BbMode::Analytic => {
                    let broadcasting = voters.iter().filter(|(_, v)| v.is_some()).count() as u64;
                    let silent_members =
                        group.iter().filter(|m| actions.silent.contains(m)).count() as u64;
                    let collector_silent = actions.silent.contains(&group[0]);
                    bb_messages += combined_message_count_detailed(
                        group.len() as u64,
                        broadcasting,
                        silent_members,
                        collector_silent,
                    );
                    // Charge the vote traffic.
                    let broadcasters: Vec<NodeId> = voters
                        .iter()
                        .filter(|(_, v)| v.is_some())
                        .map(|(m, _)| *m)
                        .collect();
                    let active: Vec<NodeId> = group
                        .iter()
                        .copied()
                        .filter(|m| !actions.silent.contains(m))
                        .collect();
                    self.charge_mesh(&broadcasters, &group, VOTE_BYTES);
                    let set_bytes = VOTE_BYTES * voters.len() as u64;
                    self.charge_mesh(&active, &group, set_bytes);
                    self.charge_mesh(&active, &group, set_bytes);
                    agreed_vote_set_analytic(&round, &adv)
                }
                BbMode::Simulated => {
                    let net_seed = self.det_draw("bb-net", epoch as u64, shard as u64);
                    let mut net: SimNet<BbMessage> = SimNet::new(
                        params.n as usize,
                        crate::simnet::secs(params.delta_s),
                        self.cfg.latency.clone(),
                        Rng::from_seed(net_seed),
                    );
                    let sim = run_combined_simulated(&mut net, &round, &adv)?;
                    bb_messages += sim.messages;
                    // All honest members must have terminated identically.
                    let mut honest_outputs = sim
                        .outputs
                        .iter()
                        .filter(|(m, _)| !actions.silent.contains(*m));
                    if let Some((_, first)) = honest_outputs.next() {
                        if honest_outputs.any(|(_, set)| set != first) {
                            return Err(EngineError::AgreementViolation { shard, epoch });
                        }
                        let expected = agreed_vote_set_analytic(&round, &adv);
                        if *first != expected {
                            return Err(EngineError::AgreementViolation { shard, epoch });
                        }
                    }
                    // Merge the per-round traffic into the engine ledger.
                    for node in 0..params.n as usize {
                        self.ledger.uploaded[node] += net.ledger.uploaded[node];
                        self.ledger.downloaded[node] += net.ledger.downloaded[node];
                        self.ledger.epoch_uploaded[node] += net.ledger.uploaded[node];
                        self.ledger.epoch_downloaded[node] += net.ledger.downloaded[node];
                    }
                    agreed_vote_set_analytic(&round, &adv)
                }
            };

            let approvals = agreed
                .values()
                .filter(|o| **o == VoteOutcome::Approve)
                .count();
            let verdict = if approvals == members.len() {
                Phase1Verdict::Unanimous {
                    block: block.expect("unanimous requires a proposal"),
                }
            } else {
                Phase1Verdict::Failed { block, block_valid }
            };
            verdicts.push(Some(verdict));
            vote_sets.push(agreed);
        }

        // ---- Phase two: control shards finalize. ----
        let mut t2_per_control = vec![0.0f64; lambda];
        let mut control_blocks = Vec::with_capacity(lambda);
        let mut shard_records: Vec<Option<ProcessShardEpoch>> = vec![None; beta];
        let mut expelled_now: BTreeSet<NodeId> = BTreeSet::new();
        let mut violated_now: Vec<NodeId> = Vec::new();
        let mut rotations_total = 0u32;
        let mut tx_committed_total: u64 = 0;
        let mut storage_bytes_total: u64 = 0;

        for control in 0..lambda as ShardIndex {
            let governed: Vec<ShardIndex> = (0..beta as ShardIndex)
                .filter(|s| self.assignment.process_to_control[*s as usize] == control)
                .collect();
            let cmembers = self.live_control_members(control);
            if cmembers.is_empty() || governed.is_empty() {
                t2_per_control[control as usize] = params.lambda_s;
                continue;
            }
            let ns = governed
                .iter()
                .filter(|s| {
                    matches!(
                        verdicts[**s as usize],
                        Some(Phase1Verdict::Unanimous { .. })
                    )
                })
                .count() as u32;
            let t2 = t2_bound(params.lambda_s, governed.len() as u32, ns)?;
            t2_per_control[control as usize] = t2;

            // Failed shards sync (last state + failed block) to the whole
            // control shard; the shard's first live member does the upload.
            for &s in &governed {
                if let Some(Phase1Verdict::Failed { block: Some(_), .. }) = &verdicts[s as usize] {
                    let uploader = members_per_shard[s as usize][0];
                    let shard_members: BTreeSet<NodeId> =
                        members_per_shard[s as usize].iter().copied().collect();
                    let up = params.block_bytes * cmembers.len() as u64
                        + params.state_bytes * (cmembers.len() as u64 - shard_members.len() as u64);
                    self.ledger.uploaded[uploader as usize] += up;
                    self.ledger.epoch_uploaded[uploader as usize] += up;
                    for m in &cmembers {
                        let down = params.block_bytes
                            + if shard_members.contains(m) {
                                0
                            } else {
                                params.state_bytes
                            };
                        self.ledger.downloaded[*m as usize] += down;
                        self.ledger.epoch_downloaded[*m as usize] += down;
                    }
                }
            }

            // Leader rotation: a silent leader proposes nothing and the next
            // candidate takes over within the same T2.
            let offset = self.det_draw("p2-leader", epoch as u64, control as u64) as usize;
            let mut accepted: Option<(NodeId, u32)> = None;
            for attempt in 0..cmembers.len() {
                let leader = cmembers[(offset + attempt) % cmembers.len()];
                if actions.silent.contains(&leader) {
                    rotations_total += 1;
                    continue;
                }
                // Honest leader: decisions match every honest member's own
                // judgment, so the majority vote accepts.
                accepted = Some((leader, attempt as u32));
                break;
            }
            let Some((leader, _)) = accepted else {
                return Err(EngineError::ControlStalled {
                    control_shard: control,
                    epoch,
                    rotations: cmembers.len() as u32,
                });
            };

            // Control block dissemination.
            let entry_bytes = CONTROL_ENTRY_BYTES * governed.len() as u64;
            self.charge_mesh(&[leader], &cmembers, entry_bytes);

            let mut entries = Vec::with_capacity(governed.len());
            let mut block_expulsions: Vec<NodeId> = Vec::new();
            let mut block_violations: Vec<NodeId> = Vec::new();

            for &s in &governed {
                let members = &members_per_shard[s as usize];
                let votes = &vote_sets[s as usize];
                let silent: Vec<NodeId> = votes
                    .iter()
                    .filter(|(_, o)| **o == VoteOutcome::Silent)
                    .map(|(m, _)| *m)
                    .collect();
                let rejecting: Vec<NodeId> = votes
                    .iter()
                    .filter(|(_, o)| **o == VoteOutcome::Reject)
                    .map(|(m, _)| *m)
                    .collect();

                let (verdict, entry, committed, stored) = match verdicts[s as usize].take() {
                    Some(Phase1Verdict::Unanimous { block }) => {
                        let sigs = members
                            .iter()
                            .map(|&m| (m, self.signer.sign(m, &block.block_hash().0)))
                            .collect();
                        let tx = block.payload.tx_count();
                        let stored = params.block_bytes * members.len() as u64;
                        self.advance_state(s, &block);
                        (
                            ProcessVerdict::UnanimousPass,
                            EntryVerdict::UnanimousPass {
                                vote_signatures: sigs,
                            },
                            tx,
                            stored,
                        )
                    }
                    Some(Phase1Verdict::Failed { block, block_valid }) => {
                        let decision = if block_valid {
                            Decision::Accept
                        } else {
                            Decision::Reject
                        };
                        let hash = block
                            .as_ref()
                            .map(|b| b.block_hash())
                            .unwrap_or_else(Hash256::zero);
                        if block_valid {
                            let block = block.expect("valid implies present");
                            let tx = block.payload.tx_count();
                            // Stored by the whole control shard plus the
                            // synced state for the outside members.
                            let stored = params.block_bytes * cmembers.len() as u64
                                + params.state_bytes
                                    * (cmembers.len() as u64 - members.len() as u64);
                            self.advance_state(s, &block);
                            // Rejecting a block the control shard accepts is
                            // an expellable offense.
                            for &r in &rejecting {
                                block_expulsions.push(r);
                            }
                            (
                                ProcessVerdict::FailedAccepted,
                                EntryVerdict::Failed {
                                    failed_block_hash: hash,
                                    leader_decision: decision,
                                },
                                tx,
                                stored,
                            )
                        } else {
                            // Invalid (or missing) proposal: state fixpoint;
                            // proposer and approvers of an invalid block are
                            // expelled; any cross legs it carried re-queue.
                            if let Some(b) = &block {
                                self.cross.on_block_rejected(s, b);
                                block_expulsions.push(b.proposer);
                                for (m, o) in votes {
                                    if *o == VoteOutcome::Approve && *m != b.proposer {
                                        block_expulsions.push(*m);
                                    }
                                }
                            }
                            (
                                ProcessVerdict::FailedRejected,
                                EntryVerdict::Failed {
                                    failed_block_hash: hash,
                                    leader_decision: decision,
                                },
                                0,
                                0,
                            )
                        }
                    }
                    None => continue,
                };

                // Silence marks; a second mark within the window expels.
                for &m in &silent {
                    if self.expelled.contains(&m) || expelled_now.contains(&m) {
                        continue;
                    }
                    match self.violations.record_silence(m, epoch) {
                        MarkResult::FirstMark => {
                            block_violations.push(m);
                            violated_now.push(m);
                            self.nodes[m as usize].violation_epochs.push(epoch);
                        }
                        MarkResult::Expelled => {
                            block_expulsions.push(m);
                            self.nodes[m as usize].violation_epochs.push(epoch);
                        }
                    }
                }

                tx_committed_total += committed as u64;
                storage_bytes_total += stored;
                shard_records[s as usize] = Some(ProcessShardEpoch {
                    shard: s,
                    verdict,
                    silent,
                    rejecting,
                    member_count: members.len() as u32,
                    tx_committed: committed,
                    state_hash_after: self.states[s as usize].state_hash,
                });
                entries.push(ControlEntry {
                    process_shard: s,
                    verdict: entry,
                });
            }

            block_expulsions.sort_unstable();
            block_expulsions.dedup();
            for &m in &block_expulsions {
                expelled_now.insert(m);
            }
            control_blocks.push(ControlBlock {
                control_shard: control,
                epoch,
                proposer: leader,
                entries,
                expulsions: block_expulsions,
                violations: block_violations,
            });
        }

        // Expulsions take effect for all later epochs.
        for &m in &expelled_now {
            self.expelled.insert(m);
            self.nodes[m as usize].expelled = true;
        }

        let t2_used = t2_per_control.iter().copied().fold(0.0f64, f64::max);
        let upload_max = self.ledger.roll_epoch();
        let outcome = EpochOutcome {
            epoch,
            shards: shard_records.into_iter().flatten().collect(),
            control_blocks,
            expelled: expelled_now.into_iter().collect(),
            violated: violated_now,
            t1_s: params.t1_s,
            t2_per_control,
            t2_used_s: t2_used,
            epoch_len_s: params.t1_s + t2_used,
            bb_messages,
            control_rotations: rotations_total,
            tx_committed: tx_committed_total,
            storage_bytes: storage_bytes_total,
            upload_bytes_max_node: upload_max,
        };
        self.epoch += 1;
        Ok(outcome)
    }

    /// Runs `n_epochs` epochs under the given adversary plan.
    pub fn run_epochs(
        &mut self,
        plan: &mut AdversaryPlan,
        n_epochs: u32,
    ) -> Result<Vec<EpochOutcome>, EngineError> {
        let mut out = Vec::with_capacity(n_epochs as usize);
        for _ in 0..n_epochs {
            let actions = plan.plan_epoch(self.epoch, &self.expelled);
            out.push(self.run_one_epoch(&actions)?);
        }
        Ok(out)
    }

    /// Runs with explicit scripted actions (tests drive edge cases directly).
    pub fn run_epoch_with_actions(
        &mut self,
        actions: &EpochActions,
    ) -> Result<EpochOutcome, EngineError> {
        self.run_one_epoch(actions)
    }

    /// Global balance plus in-flight cross amounts; conserved in Full mode.
    pub fn global_balance_with_inflight(&self) -> u128 {
        let states: u128 = self.states.iter().map(|s| s.total_balance()).sum();
        states + self.cross.in_flight_total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{CorruptionSpec, Strategy};

    #[test]
    fn shard_indices_hand_traces() {
        // floor(37/5) = 7, floor(7/(20/5)) = 1.
        assert_eq!(shard_indices(37, 100, 5, 20), (7, 1));
        // Remainder branches: floor(103/20)*20 = 100 <= 101, so index2
        // drops to 4 and index1 clamps to floor(103/5)-1 = 19.
        assert_eq!(shard_indices(101, 103, 5, 20), (19, 4));
        assert_eq!(shard_indices(0, 100, 5, 20), (0, 0));
    }

    #[test]
    fn shard_indices_reference_configuration_folds() {
        // N=5000, Np=21, Nc=329: the fold boundary is 15*329 = 4935.
        let (p, c) = shard_indices(4934, 5000, 21, 329);
        assert_eq!((p, c), (234, 14));
        let (p, c) = shard_indices(4935, 5000, 21, 329);
        assert_eq!((p, c), (235, 14));
        // The very last nodes fold into the last process shard (237).
        let (p, c) = shard_indices(4999, 5000, 21, 329);
        assert_eq!((p, c), (237, 14));
    }

    #[test]
    fn bootstrap_assigns_every_node_once() {
        let ids: Vec<NodeId> = (0..103).collect();
        let a = bootstrap(&ids, &[3; 32], 5, 20).unwrap();
        // Every node in exactly one process and one control shard.
        let mut seen = BTreeSet::new();
        for (s, members) in a.process_members.iter().enumerate() {
            for &m in members {
                assert!(seen.insert(m), "node {m} in two process shards");
                assert_eq!(a.placements[m as usize].0 as usize, s);
            }
        }
        assert_eq!(seen.len(), 103);
        let mut seen = BTreeSet::new();
        for members in a.control_members.iter() {
            for &m in members {
                assert!(seen.insert(m), "node {m} in two control shards");
            }
        }
        assert_eq!(seen.len(), 103);
        // Process shards sit wholly inside their control shard.
        for (s, members) in a.process_members.iter().enumerate() {
            let control = a.process_to_control[s];
            for &m in members {
                assert_eq!(a.placements[m as usize].1, control);
            }
        }
    }

    #[test]
    fn bootstrap_requires_enough_nodes() {
        let ids: Vec<NodeId> = (0..10).collect();
        assert!(matches!(
            bootstrap(&ids, &[0; 32], 5, 20),
            Err(EngineError::Config(_))
        ));
    }

    fn small_params() -> ProtocolParams {
        ProtocolParams {
            n: 60,
            np: 3,
            nc: 12,
            pa: 0.33,
            sigma: 8,
            tau: 10,
            lambda_s: 50.0,
            delta_s: 10.0,
            t1_s: 86.0,
            block_bytes: 2048,
            state_bytes: 512,
            tx_per_block: 64,
        }
    }

    fn synthetic_engine(seed: u64) -> Engine {
        Engine::new(EngineConfig::synthetic(small_params(), seed)).unwrap()
    }

    #[test]
    fn all_honest_epochs_pass_unanimously() {
        let mut e = synthetic_engine(1);
        let mut plan =
            AdversaryPlan::new(Strategy::None, &CorruptionSpec::None, &e.assignment, 10, 1)
                .unwrap();
        let outcomes = e.run_epochs(&mut plan, 5).unwrap();
        for o in &outcomes {
            assert!(o
                .shards
                .iter()
                .all(|s| s.verdict == ProcessVerdict::UnanimousPass));
            assert_eq!(o.t2_used_s, 50.0);
            assert_eq!(o.epoch_len_s, 136.0);
            assert!(o.expelled.is_empty() && o.violated.is_empty());
        }
    }

    #[test]
    fn one_silent_member_fails_unanimity_but_block_is_accepted() {
        let mut e = synthetic_engine(2);
        let members = e.live_process_members(0);
        let leader = e.phase1_leader(0, &members);
        let victim = *members.iter().find(|m| **m != leader).unwrap();
        let mut actions = EpochActions::default();
        actions.silent.insert(victim);
        let o = e.run_epoch_with_actions(&actions).unwrap();
        let rec = o.shards.iter().find(|s| s.shard == 0).unwrap();
        assert_eq!(rec.verdict, ProcessVerdict::FailedAccepted);
        assert_eq!(rec.silent, vec![victim]);
        assert_eq!(o.violated, vec![victim]);
        assert!(o.expelled.is_empty());
        // Remaining shards passed, so Ns drops by one for that control only.
        let control = e.assignment.process_to_control[0] as usize;
        assert_eq!(o.t2_per_control[control], 100.0);
    }

    #[test]
    fn second_silence_within_window_expels() {
        let mut e = synthetic_engine(3);
        let victim = e.assignment.process_members[0][0];
        let mut actions = EpochActions::default();
        actions.silent.insert(victim);
        let o1 = e.run_epoch_with_actions(&actions).unwrap();
        assert!(o1.expelled.is_empty());
        let o2 = e.run_epoch_with_actions(&actions).unwrap();
        assert_eq!(o2.expelled, vec![victim]);
        // Thereafter the shard reaches unanimity among remaining members.
        let o3 = e.run_epoch_with_actions(&EpochActions::default()).unwrap();
        let rec = o3.shards.iter().find(|s| s.shard == 0).unwrap();
        assert_eq!(rec.verdict, ProcessVerdict::UnanimousPass);
        assert_eq!(rec.member_count, 2);
    }

    #[test]
    fn silence_gap_of_tau_is_tolerated() {
        let mut e = synthetic_engine(4);
        let victim = e.assignment.process_members[0][0];
        let mut silent = EpochActions::default();
        silent.silent.insert(victim);
        let o = e.run_epoch_with_actions(&silent).unwrap();
        assert!(o.expelled.is_empty());
        for _ in 0..9 {
            e.run_epoch_with_actions(&EpochActions::default()).unwrap();
        }
        // Epoch 10: exactly tau epochs after the first mark.
        let o = e.run_epoch_with_actions(&silent).unwrap();
        assert!(o.expelled.is_empty(), "gap of tau must not expel");
    }

    #[test]
    fn tumbling_window_resets_at_the_boundary() {
        // Silences at epochs tau-1 and tau sit in different tumbling
        // windows (no expulsion) but within one sliding window (expulsion).
        let run = |window| {
            let mut cfg = EngineConfig::synthetic(small_params(), 4);
            cfg.window = window;
            let mut e = Engine::new(cfg).unwrap();
            let victim = e.assignment.process_members[0][0];
            let mut silent = EpochActions::default();
            silent.silent.insert(victim);
            for _ in 0..9 {
                e.run_epoch_with_actions(&EpochActions::default()).unwrap();
            }
            e.run_epoch_with_actions(&silent).unwrap(); // epoch 9
            let o = e.run_epoch_with_actions(&silent).unwrap(); // epoch 10
            o.expelled
        };
        assert!(run(ViolationWindow::Tumbling).is_empty());
        assert!(!run(ViolationWindow::Sliding).is_empty());
    }

    #[test]
    fn rejected_epoch_is_a_state_fixpoint() {
        let mut e = synthetic_engine(5);
        let before = e.states[0].state_hash;
        // Make shard 0's leader propose an invalid block.
        let members = e.live_process_members(0);
        let leader = e.phase1_leader(0, &members);
        let mut actions = EpochActions::default();
        actions.invalid_proposal.insert(leader);
        let o = e.run_epoch_with_actions(&actions).unwrap();
        let rec = o.shards.iter().find(|s| s.shard == 0).unwrap();
        assert_eq!(rec.verdict, ProcessVerdict::FailedRejected);
        assert_eq!(e.states[0].state_hash, before);
        // Proposer of the invalid block is expelled.
        assert!(o.expelled.contains(&leader));
        // Honest rejecting members are never expelled here.
        for m in &rec.rejecting {
            assert!(!o.expelled.contains(m) || *m == leader);
        }
    }

    #[test]
    fn silent_leader_yields_failed_epoch_without_block() {
        let mut e = synthetic_engine(6);
        let members = e.live_process_members(0);
        let leader = e.phase1_leader(0, &members);
        let mut actions = EpochActions::default();
        actions.silent.insert(leader);
        let before = e.states[0].state_hash;
        let o = e.run_epoch_with_actions(&actions).unwrap();
        let rec = o.shards.iter().find(|s| s.shard == 0).unwrap();
        assert_eq!(rec.verdict, ProcessVerdict::FailedRejected);
        assert_eq!(rec.tx_committed, 0);
        assert_eq!(e.states[0].state_hash, before);
        // The silent leader earns the violation mark, nobody else.
        assert_eq!(o.violated, vec![leader]);
    }

    #[test]
    fn deterministic_outcomes_across_reruns() {
        let run = |seed| {
            let mut e = synthetic_engine(seed);
            let mut plan = AdversaryPlan::new(
                Strategy::Worst,
                &CorruptionSpec::PerShard { count: 1 },
                &e.assignment,
                10,
                seed,
            )
            .unwrap();
            let outcomes = e.run_epochs(&mut plan, 12).unwrap();
            outcomes
                .iter()
                .map(|o| {
                    (
                        o.epoch,
                        o.tx_committed,
                        o.t2_used_s.to_bits(),
                        o.expelled.clone(),
                        o.shards
                            .iter()
                            .map(|s| s.state_hash_after)
                            .collect::<Vec<_>>(),
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn ledger_conservation_in_analytic_mode() {
        let mut e = synthetic_engine(7);
        let mut plan = AdversaryPlan::new(
            Strategy::Worst,
            &CorruptionSpec::PerShard { count: 1 },
            &e.assignment,
            10,
            7,
        )
        .unwrap();
        e.run_epochs(&mut plan, 4).unwrap();
        assert_eq!(e.ledger.total_uploaded(), e.ledger.total_downloaded());
    }

    #[test]
    fn simulated_and_analytic_bb_agree_on_outcomes() {
        let mk = |bb_mode| {
            let mut cfg = EngineConfig::synthetic(small_params(), 11);
            cfg.bb_mode = bb_mode;
            let mut e = Engine::new(cfg).unwrap();
            let mut plan = AdversaryPlan::new(
                Strategy::Worst,
                &CorruptionSpec::PerShard { count: 1 },
                &e.assignment,
                10,
                11,
            )
            .unwrap();
            let outcomes = e.run_epochs(&mut plan, 3).unwrap();
            outcomes
                .iter()
                .map(|o| {
                    o.shards
                        .iter()
                        .map(|s| (s.shard, s.verdict, s.silent.clone()))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(mk(BbMode::Analytic), mk(BbMode::Simulated));
    }

    #[test]
    fn bb_message_budget_matches_formula_small() {
        let mut e = synthetic_engine(8);
        let o = e.run_epoch_with_actions(&EpochActions::default()).unwrap();
        // 20 shards of 3 voters, control groups of 12.
        let expected: u64 = (0..20)
            .map(|s| {
                let control = e.assignment.process_to_control[s as usize];
                let g = e.assignment.control_members[control as usize].len() as u64;
                combined_message_count_detailed(g, 3, 0, false)
            })
            .sum();
        assert_eq!(o.bb_messages, expected);
    }
}
