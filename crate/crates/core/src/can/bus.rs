use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{CanError, CanFrame};
use crate::NodeId;

pub const DEFAULT_BITRATE_BPS: u64 = 500_000;

#[derive(Debug)]
struct Pending {
    order: u64,
    frame: CanFrame,
    sender: NodeId,
}

impl Pending {
    fn key(&self) -> (u32, u64) {
        (self.frame.aid(), self.order)
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// A frame that won arbitration, with everyone who will hear it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub frame: CanFrame,
    pub sender: NodeId,
    pub receivers: Vec<NodeId>,
    /// Bus occupancy; the frame is received `duration_us` after arbitration.
    pub duration_us: u64,
}

/// A lossless broadcast CAN segment.
///
/// The bus is driven externally: [`CanBus::transmit`] queues a frame and
/// reports whether the bus was idle, [`CanBus::arbitrate`] picks the
/// lowest-identifier pending frame, and [`CanBus::finish`] releases the bus
/// once that frame's transmission time has elapsed.
#[derive(Debug)]
pub struct CanBus {
    id: String,
    nodes: Vec<NodeId>,
    pending: BinaryHeap<Reverse<Pending>>,
    bitrate_bps: u64,
    next_order: u64,
    busy: bool,
    transmitted: u64,
    delivered: u64,
}

impl CanBus {
    pub fn new(id: impl Into<String>, bitrate_bps: u64) -> Self {
        Self {
            id: id.into(),
            nodes: Vec::new(),
            pending: BinaryHeap::new(),
            bitrate_bps,
            next_order: 0,
            busy: false,
            transmitted: 0,
            delivered: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn attach(&mut self, node: NodeId) {
        if !self.nodes.contains(&node) {
            self.nodes.push(node);
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn bitrate_bps(&self) -> u64 {
        self.bitrate_bps
    }

    pub fn transmitted(&self) -> u64 {
        self.transmitted
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Queues `frame` for arbitration. Returns `true` when the bus is idle
    /// and the caller should schedule an arbitration round.
    pub fn transmit(&mut self, frame: CanFrame, sender: NodeId) -> Result<bool, CanError> {
        if !self.nodes.contains(&sender) {
            return Err(CanError::UnknownSender(format!("{sender:?} on bus {}", self.id)));
        }
        // Frames can only be built through the checked constructor, so the
        // identifier and length invariants already hold here.
        self.pending.push(Reverse(Pending {
            order: self.next_order,
            frame,
            sender,
        }));
        self.next_order += 1;
        self.transmitted += 1;
        Ok(!self.busy && self.pending.len() == 1)
    }

    /// Runs one arbitration round at `now_us`: the pending frame with the
    /// lowest identifier (then earliest enqueue) takes the bus.
    pub fn arbitrate(&mut self, now_us: u64) -> Option<Delivery> {
        if self.busy {
            return None;
        }
        let Reverse(winner) = self.pending.pop()?;
        self.busy = true;
        let frame = winner.frame.with_ts(now_us);
        let receivers = self.nodes.iter().copied().filter(|&n| n != winner.sender).collect();
        let duration_us = frame.duration_us(self.bitrate_bps);
        Some(Delivery {
            frame,
            sender: winner.sender,
            receivers,
            duration_us,
        })
    }

    /// Marks the in-flight frame delivered. Returns `true` if more frames
    /// wait and another arbitration round should be scheduled.
    pub fn finish(&mut self) -> bool {
        if self.busy {
            self.busy = false;
            self.delivered += 1;
        }
        !self.pending.is_empty()
    }
}
