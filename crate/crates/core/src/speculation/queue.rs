use std::collections::VecDeque;

use crate::netsim::BandwidthModel;
use crate::time::{Instant, Span};

pub const DEFAULT_DEPTH_THRESHOLD: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueuedRequest {
    pub enqueued: Instant,
    /// When the last byte leaves the uplink.
    pub departs: Instant,
}

/// Outbound request queue in front of one cloud endpoint.
///
/// Requests are serialized onto the uplink one after another at the
/// bandwidth model's rate; an entry counts toward the depth until it has
/// fully departed.
#[derive(Clone, Debug)]
pub struct OutboundQueue {
    entries: VecDeque<QueuedRequest>,
    depth_threshold: usize,
    bandwidth: BandwidthModel,
}

impl OutboundQueue {
    pub fn new(depth_threshold: usize, bandwidth: BandwidthModel) -> Self {
        OutboundQueue { entries: VecDeque::new(), depth_threshold, bandwidth }
    }

    pub fn depth_threshold(&self) -> usize {
        self.depth_threshold
    }

    pub fn bandwidth(&self) -> &BandwidthModel {
        &self.bandwidth
    }

    fn drain_departed(&mut self, now: Instant) {
        while self.entries.front().is_some_and(|e| e.departs <= now) {
            self.entries.pop_front();
        }
    }

    pub fn depth(&mut self, now: Instant) -> usize {
        self.drain_departed(now);
        self.entries.len()
    }

    /// True iff the current depth is below the threshold.
    pub fn admit_request(&mut self, now: Instant) -> bool {
        self.depth(now) < self.depth_threshold
    }

    /// Appends a request, returning its departure instant, or `None` when the
    /// queue is full. Admitted entries are never dropped.
    pub fn enqueue(&mut self, now: Instant, payload_bytes: usize) -> Option<Instant> {
        if !self.admit_request(now) {
            return None;
        }
        let start = self.entries.back().map_or(now, |last| last.departs.max(now));
        let departs = start + Span::from_ms(self.bandwidth.serialization_delay_ms(payload_bytes));
        self.entries.push_back(QueuedRequest { enqueued: now, departs });
        Some(departs)
    }
}

impl Default for OutboundQueue {
    fn default() -> Self {
        OutboundQueue::new(DEFAULT_DEPTH_THRESHOLD, BandwidthModel::unlimited())
    }
}
