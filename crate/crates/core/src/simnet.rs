//! Deterministic virtual-time message scheduler for the synchronous network
//! model: bounded delay, seeded per-message latency, gossip fan-out and
//! per-node bandwidth accounting.
//!
//! Virtual time is a 64-bit millisecond count. Delivery order within a tick
//! is `(deliver_at, msg_id)`, so identical seed and scenario always produce a
//! byte-identical event transcript. Honest messages are never lost and never
//! exceed the delay bound; adversarial silence is modeled at the behavior
//! layer, not by dropping packets here.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::model::NodeId;
use crate::rng::Rng;

/// Virtual milliseconds.
pub type VirtualTime = u64;

pub fn secs(s: f64) -> VirtualTime {
    (s * 1000.0).round() as VirtualTime
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("latency {latency_ms} ms exceeds the delay bound {bound_ms} ms")]
    LatencyExceedsBound { latency_ms: u64, bound_ms: u64 },
    #[error("sender {0} is expelled")]
    SenderExpelled(NodeId),
    #[error(
        "node {node} upload budget exceeded: {used} + {requested} > {budget} bytes this epoch"
    )]
    UploadBudgetExceeded {
        node: NodeId,
        used: u64,
        requested: u64,
        budget: u64,
    },
    #[error("cannot advance to {to} ms: now is {now} ms")]
    TimeWentBackwards { to: VirtualTime, now: VirtualTime },
}

/// A queued message.
#[derive(Debug, Clone)]
pub struct Envelope<P> {
    pub msg_id: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub payload_size: u64,
    pub send_at: VirtualTime,
    pub deliver_at: VirtualTime,
    pub payload: P,
}

/// How per-message latency is drawn. The flat 200 ms profile is the default;
/// the uniform profile draws in `[lo, hi]` from the net's seeded stream.
#[derive(Debug, Clone)]
pub enum LatencyModel {
    Flat(VirtualTime),
    Uniform { lo: VirtualTime, hi: VirtualTime },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Flat(200)
    }
}

impl LatencyModel {
    pub fn sample(&self, rng: &mut Rng) -> VirtualTime {
        match self {
            LatencyModel::Flat(ms) => *ms,
            LatencyModel::Uniform { lo, hi } => rng.range_inclusive(*lo, *hi),
        }
    }
}

/// Per-node upload/download accounting with per-epoch buckets.
#[derive(Debug, Clone, Default)]
pub struct BandwidthLedger {
    pub uploaded: Vec<u64>,
    pub downloaded: Vec<u64>,
    pub epoch_uploaded: Vec<u64>,
    pub epoch_downloaded: Vec<u64>,
}

impl BandwidthLedger {
    pub fn new(n_nodes: usize) -> Self {
        BandwidthLedger {
            uploaded: vec![0; n_nodes],
            downloaded: vec![0; n_nodes],
            epoch_uploaded: vec![0; n_nodes],
            epoch_downloaded: vec![0; n_nodes],
        }
    }

    pub fn charge(&mut self, from: NodeId, to: NodeId, bytes: u64) {
        self.uploaded[from as usize] += bytes;
        self.downloaded[to as usize] += bytes;
        self.epoch_uploaded[from as usize] += bytes;
        self.epoch_downloaded[to as usize] += bytes;
    }

    /// Resets the per-epoch buckets, returning the epoch's maximum per-node
    /// upload.
    pub fn roll_epoch(&mut self) -> u64 {
        let max = self.epoch_uploaded.iter().copied().max().unwrap_or(0);
        self.epoch_uploaded.iter_mut().for_each(|v| *v = 0);
        self.epoch_downloaded.iter_mut().for_each(|v| *v = 0);
        max
    }

    pub fn total_uploaded(&self) -> u128 {
        self.uploaded.iter().map(|v| *v as u128).sum()
    }

    pub fn total_downloaded(&self) -> u128 {
        self.downloaded.iter().map(|v| *v as u128).sum()
    }
}

/// One transcript line per delivery, for debugging and bandwidth plots.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptLine {
    pub time: VirtualTime,
    pub from: NodeId,
    pub to: NodeId,
    pub size: u64,
    pub kind: &'static str,
}

struct Pending<P> {
    envelope: Envelope<P>,
    kind: &'static str,
}

/// The deterministic event loop. Single-threaded; run independent
/// scenario instances on separate workers instead of sharing one.
pub struct SimNet<P> {
    now: VirtualTime,
    next_msg_id: u64,
    delta_ms: VirtualTime,
    latency: LatencyModel,
    rng: Rng,
    queue: BinaryHeap<Reverse<(VirtualTime, u64)>>,
    pending: BTreeMap<u64, Pending<P>>,
    pub ledger: BandwidthLedger,
    blocked: BTreeSet<NodeId>,
    /// Optional per-epoch upload budget (bytes); enforced when set.
    pub upload_budget: Option<u64>,
    pub transcript: Option<Vec<TranscriptLine>>,
}

impl<P: Clone> SimNet<P> {
    pub fn new(n_nodes: usize, delta_ms: VirtualTime, latency: LatencyModel, rng: Rng) -> Self {
        SimNet {
            now: 0,
            next_msg_id: 0,
            delta_ms,
            latency,
            rng,
            queue: BinaryHeap::new(),
            pending: BTreeMap::new(),
            ledger: BandwidthLedger::new(n_nodes),
            blocked: BTreeSet::new(),
            upload_budget: None,
            transcript: None,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.now
    }

    pub fn delta_ms(&self) -> VirtualTime {
        self.delta_ms
    }

    /// Marks a node as expelled; subsequent sends from it are refused.
    pub fn block_sender(&mut self, node: NodeId) {
        self.blocked.insert(node);
    }

    /// Enqueues a message with an explicit latency.
    pub fn send_with_latency(
        &mut self,
        from: NodeId,
        to: NodeId,
        payload: P,
        size: u64,
        latency_ms: VirtualTime,
        kind: &'static str,
    ) -> Result<u64, NetError> {
        if latency_ms > self.delta_ms {
            return Err(NetError::LatencyExceedsBound {
                latency_ms,
                bound_ms: self.delta_ms,
            });
        }
        if self.blocked.contains(&from) {
            return Err(NetError::SenderExpelled(from));
        }
        if let Some(budget) = self.upload_budget {
            let used = self.ledger.epoch_uploaded[from as usize];
            if used + size > budget {
                return Err(NetError::UploadBudgetExceeded {
                    node: from,
                    used,
                    requested: size,
                    budget,
                });
            }
        }
        let msg_id = self.next_msg_id;
        self.next_msg_id += 1;
        let envelope = Envelope {
            msg_id,
            from,
            to,
            payload_size: size,
            send_at: self.now,
            deliver_at: self.now + latency_ms,
            payload,
        };
        self.queue.push(Reverse((envelope.deliver_at, msg_id)));
        self.pending.insert(msg_id, Pending { envelope, kind });
        Ok(msg_id)
    }

    /// Enqueues a message with a latency drawn from the configured model.
    pub fn send(
        &mut self,
        from: NodeId,
        to: NodeId,
        payload: P,
        size: u64,
        kind: &'static str,
    ) -> Result<u64, NetError> {
        let latency = self.latency.sample(&mut self.rng).min(self.delta_ms);
        self.send_with_latency(from, to, payload, size, latency, kind)
    }

    /// Fan-out send to every group member (excluding the sender itself),
    /// with independent latency draws. Overlay gossip hops are abstracted as
    /// direct sends.
    pub fn gossip(
        &mut self,
        from: NodeId,
        group: &[NodeId],
        payload: &P,
        size: u64,
        kind: &'static str,
    ) -> Result<Vec<u64>, NetError> {
        let mut ids = Vec::with_capacity(group.len());
        for &member in group {
            if member == from {
                continue;
            }
            ids.push(self.send(from, member, payload.clone(), size, kind)?);
        }
        Ok(ids)
    }

    /// Delivers every envelope due at or before `t` in `(deliver_at, msg_id)`
    /// order, charging the bandwidth ledger at delivery, and advances the
    /// clock to `t`.
    pub fn advance_until(&mut self, t: VirtualTime) -> Result<Vec<Envelope<P>>, NetError> {
        if t < self.now {
            return Err(NetError::TimeWentBackwards {
                to: t,
                now: self.now,
            });
        }
        let mut delivered = Vec::new();
        while let Some(Reverse((at, id))) = self.queue.peek().copied() {
            if at > t {
                break;
            }
            self.queue.pop();
            let Pending { envelope, kind } = self.pending.remove(&id).expect("queued message");
            self.ledger
                .charge(envelope.from, envelope.to, envelope.payload_size);
            if let Some(log) = self.transcript.as_mut() {
                log.push(TranscriptLine {
                    time: envelope.deliver_at,
                    from: envelope.from,
                    to: envelope.to,
                    size: envelope.payload_size,
                    kind,
                });
            }
            delivered.push(envelope);
        }
        self.now = t;
        Ok(delivered)
    }

    pub fn messages_sent(&self) -> u64 {
        self.next_msg_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> SimNet<&'static str> {
        SimNet::new(8, 10_000, LatencyModel::default(), Rng::from_seed(5))
    }

    #[test]
    fn flat_latency_delivers_at_200ms() {
        let mut n = net();
        n.send(0, 1, "vote", 100, "vote").unwrap();
        let out = n.advance_until(199).unwrap();
        assert!(out.is_empty());
        let out = n.advance_until(200).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].deliver_at, 200);
    }

    #[test]
    fn latency_at_the_bound_is_accepted() {
        let mut n = net();
        n.send_with_latency(0, 1, "x", 1, 10_000, "x").unwrap();
        assert_eq!(n.advance_until(10_000).unwrap().len(), 1);
        let err = n.send_with_latency(0, 1, "x", 1, 10_001, "x").unwrap_err();
        assert!(matches!(err, NetError::LatencyExceedsBound { .. }));
    }

    #[test]
    fn same_tick_delivery_is_msg_id_ordered() {
        let mut n = net();
        let a = n.send_with_latency(0, 1, "a", 1, 100, "x").unwrap();
        let b = n.send_with_latency(2, 3, "b", 1, 100, "x").unwrap();
        let out = n.advance_until(100).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].msg_id, a);
        assert_eq!(out[1].msg_id, b);
    }

    #[test]
    fn partial_advance_delivers_prefix() {
        let mut n = net();
        n.send_with_latency(0, 1, "a", 1, 1000, "x").unwrap();
        n.send_with_latency(0, 1, "b", 1, 2000, "x").unwrap();
        n.send_with_latency(0, 1, "c", 1, 3000, "x").unwrap();
        assert_eq!(n.advance_until(2000).unwrap().len(), 2);
        assert_eq!(n.advance_until(3000).unwrap().len(), 1);
        assert!(n.advance_until(3000).unwrap().is_empty());
    }

    #[test]
    fn time_cannot_go_backwards() {
        let mut n = net();
        n.advance_until(50).unwrap();
        assert!(matches!(
            n.advance_until(49),
            Err(NetError::TimeWentBackwards { .. })
        ));
    }

    #[test]
    fn gossip_charges_ledger_per_member() {
        let mut n = net();
        let group = [1, 2, 3, 4];
        n.gossip(0, &group, &"blk", 500, "block").unwrap();
        n.advance_until(10_000).unwrap();
        assert_eq!(n.ledger.uploaded[0], 2000);
        assert_eq!(n.ledger.total_uploaded(), n.ledger.total_downloaded());
    }

    #[test]
    fn gossip_skips_self_and_empty_group() {
        let mut n = net();
        let ids = n.gossip(1, &[1], &"x", 10, "x").unwrap();
        assert!(ids.is_empty());
        let ids = n.gossip(1, &[], &"x", 10, "x").unwrap();
        assert!(ids.is_empty());
    }

    #[test]
    fn expelled_sender_is_refused() {
        let mut n = net();
        n.block_sender(3);
        assert_eq!(
            n.send(3, 1, "x", 1, "x").unwrap_err(),
            NetError::SenderExpelled(3)
        );
    }

    #[test]
    fn upload_budget_enforced_when_enabled() {
        let mut n = net();
        n.upload_budget = Some(1000);
        n.send(0, 1, "x", 600, "x").unwrap();
        n.advance_until(500).unwrap();
        let err = n.send(0, 1, "x", 600, "x").unwrap_err();
        assert!(matches!(err, NetError::UploadBudgetExceeded { .. }));
    }

    #[test]
    fn transcripts_identical_across_reruns() {
        let run = || {
            let mut n = SimNet::new(
                8,
                10_000,
                LatencyModel::Uniform { lo: 100, hi: 200 },
                Rng::from_seed(77),
            );
            n.transcript = Some(Vec::new());
            for i in 0..20u32 {
                n.send((i % 4) as NodeId, ((i + 1) % 4) as NodeId, "m", 64, "m")
                    .unwrap();
            }
            n.advance_until(10_000).unwrap();
            n.transcript.unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn uniform_latency_respects_bounds() {
        let mut n = SimNet::new(
            4,
            10_000,
            LatencyModel::Uniform { lo: 100, hi: 200 },
            Rng::from_seed(9),
        );
        for _ in 0..50 {
            n.send(0, 1, "m", 1, "m").unwrap();
        }
        let out = n.advance_until(10_000).unwrap();
        for e in out {
            let lat = e.deliver_at - e.send_at;
            assert!((100..=200).contains(&lat));
        }
    }
}
