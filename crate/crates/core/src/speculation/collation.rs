//! Per-timestamp collation of local and cloud results.
//!
//! Three event sources touch a timestamp's record: the local callback's
//! `send`, cloud responses, and deadline timers. Each call on [`Collator`]
//! is one atomic transition; the caller serializes them (the runtime does so
//! by processing events from a single ordered queue).
//!
//! Rules, per timestamp `t`:
//!
//! * local send: dropped once `t` was forwarded; cached while a request with a
//!   higher priority is still pending; forwarded otherwise.
//! * cloud response `(t, p)`: dropped if its timer already fired or `t` was
//!   forwarded; cached while a higher-priority request is pending; forwarded
//!   otherwise.
//! * timer `(t, p)`: forwards the best cached result, if any. Every active
//!   timer bounds the total wait, so a fire with a cached lower-priority result
//!   forwards it even when a higher-priority request is still in flight.
//! * once every timer of `t` fired with an empty cache, the next local result
//!   forwards immediately.

use std::collections::BTreeMap;

use crate::dataflow::LogicalTimestamp;
use crate::time::Instant;

use super::{Priority, SpeculationError};

/// Which execution produced a forwarded result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResultSource {
    Local,
    Cloud(Priority),
}

impl ResultSource {
    pub fn priority(self) -> Priority {
        match self {
            ResultSource::Local => Priority::LOCAL,
            ResultSource::Cloud(p) => p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    AlreadySent,
    MissedDeadline,
    UnknownRequest,
    Superseded,
}

/// Outcome of one collation transition.
#[derive(Clone, Debug, PartialEq)]
pub enum Decision<M> {
    /// Send `message` downstream. It may be a previously cached result.
    Forward { source: ResultSource, message: M },
    Cache,
    Drop(DropReason),
    NoOp,
}

impl<M> Decision<M> {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Forward { .. } => "forward",
            Decision::Cache => "cache",
            Decision::Drop(_) => "drop",
            Decision::NoOp => "noop",
        }
    }

    pub fn is_forward(&self) -> bool {
        matches!(self, Decision::Forward { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RequestState {
    /// Dispatched, no response yet, timer active.
    Pending,
    /// Response arrived and was cached; the timer stays armed.
    Cached,
    /// Timer fired.
    Fired,
    /// Timer deactivated by a forward, an on-time arrival, or a drop.
    Cancelled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingRequest {
    pub priority: Priority,
    pub deadline: Instant,
    pub state: RequestState,
}

impl PendingRequest {
    pub fn timer_active(&self) -> bool {
        matches!(self.state, RequestState::Pending | RequestState::Cached)
    }
}

#[derive(Clone, Debug)]
pub struct CollationRecord<M> {
    pub timestamp: LogicalTimestamp,
    requests: BTreeMap<Priority, PendingRequest>,
    cache: Option<(ResultSource, M)>,
    sent: Option<ResultSource>,
    expired_all: bool,
}

impl<M> CollationRecord<M> {
    fn new(timestamp: LogicalTimestamp) -> Self {
        CollationRecord { timestamp, requests: BTreeMap::new(), cache: None, sent: None, expired_all: false }
    }

    pub fn requests(&self) -> impl Iterator<Item = &PendingRequest> {
        self.requests.values()
    }

    pub fn cached_source(&self) -> Option<ResultSource> {
        self.cache.as_ref().map(|(s, _)| *s)
    }

    pub fn sent(&self) -> bool {
        self.sent.is_some()
    }

    pub fn forwarded_source(&self) -> Option<ResultSource> {
        self.sent
    }

    pub fn expired_all(&self) -> bool {
        self.expired_all
    }

    fn pending_above(&self, p: Priority) -> bool {
        self.requests
            .range(p.next()..)
            .any(|(_, r)| r.state == RequestState::Pending)
    }

    fn cache_offer(&mut self, source: ResultSource, message: M) {
        match &self.cache {
            Some((held, _)) if held.priority() >= source.priority() => {}
            _ => self.cache = Some((source, message)),
        }
    }

    fn deactivate_all(&mut self) {
        for r in self.requests.values_mut() {
            if r.timer_active() {
                r.state = RequestState::Cancelled;
            }
        }
    }

    fn forward(&mut self, source: ResultSource, message: M) -> Decision<M> {
        // A cached result can only outrank the arriving one if the rules were
        // bypassed; keep the better of the two.
        let (source, message) = match self.cache.take() {
            Some((held, cached)) if held.priority() > source.priority() => (held, cached),
            _ => (source, message),
        };
        self.sent = Some(source);
        self.deactivate_all();
        Decision::Forward { source, message }
    }
}

/// Collation state for one operator, keyed by logical timestamp.
#[derive(Clone, Debug)]
pub struct Collator<M> {
    records: BTreeMap<LogicalTimestamp, CollationRecord<M>>,
}

impl<M> Default for Collator<M> {
    fn default() -> Self {
        Collator { records: BTreeMap::new() }
    }
}

impl<M> Collator<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, t: LogicalTimestamp) -> Option<&CollationRecord<M>> {
        self.records.get(&t)
    }

    fn record_mut(&mut self, t: LogicalTimestamp) -> &mut CollationRecord<M> {
        self.records.entry(t).or_insert_with(|| CollationRecord::new(t))
    }

    /// Indexes a dispatched request by `(t, p)` with its absolute deadline.
    pub fn register_request(
        &mut self,
        t: LogicalTimestamp,
        priority: Priority,
        deadline: Instant,
    ) -> Result<(), SpeculationError> {
        if priority <= Priority::LOCAL {
            return Err(SpeculationError::PriorityNotAboveLocal(priority));
        }
        let record = self.record_mut(t);
        if record.sent() {
            return Err(SpeculationError::AlreadyForwarded(t));
        }
        if record.requests.contains_key(&priority) {
            return Err(SpeculationError::DuplicateRequest { timestamp: t, priority });
        }
        record.requests.insert(priority, PendingRequest { priority, deadline, state: RequestState::Pending });
        record.expired_all = false;
        Ok(())
    }

    /// Intercepts the local callback's `send` for timestamp `t`.
    pub fn on_local_result(&mut self, t: LogicalTimestamp, message: M) -> Decision<M> {
        let record = self.record_mut(t);
        if record.sent() {
            return Decision::Drop(DropReason::AlreadySent);
        }
        if record.pending_above(Priority::LOCAL) {
            record.cache_offer(ResultSource::Local, message);
            return Decision::Cache;
        }
        record.forward(ResultSource::Local, message)
    }

    pub fn on_cloud_response(&mut self, t: LogicalTimestamp, priority: Priority, message: M) -> Decision<M> {
        let Some(record) = self.records.get_mut(&t) else {
            log::debug!("cloud response for unknown timestamp {t} priority {priority}");
            return Decision::Drop(DropReason::UnknownRequest);
        };
        let Some(state) = record.requests.get(&priority).map(|r| r.state) else {
            log::debug!("cloud response for unknown request ({t}, {priority})");
            return Decision::Drop(DropReason::UnknownRequest);
        };
        match state {
            RequestState::Fired => return Decision::Drop(DropReason::MissedDeadline),
            // a second response for the same request
            RequestState::Cached => return Decision::Drop(DropReason::Superseded),
            RequestState::Cancelled | RequestState::Pending => {}
        }
        let request = record.requests.get_mut(&priority).expect("present");
        if record.sent.is_some() {
            request.state = RequestState::Cancelled;
            return Decision::Drop(DropReason::AlreadySent);
        }
        if record.pending_above(priority) {
            record.requests.get_mut(&priority).expect("present").state = RequestState::Cached;
            record.cache_offer(ResultSource::Cloud(priority), message);
            return Decision::Cache;
        }
        record.forward(ResultSource::Cloud(priority), message)
    }

    pub fn on_timer_fire(&mut self, t: LogicalTimestamp, priority: Priority) -> Decision<M> {
        let Some(record) = self.records.get_mut(&t) else {
            return Decision::NoOp;
        };
        let Some(request) = record.requests.get_mut(&priority) else {
            return Decision::NoOp;
        };
        if !request.timer_active() {
            return Decision::NoOp;
        }
        request.state = RequestState::Fired;
        if record.sent() {
            return Decision::NoOp;
        }
        if let Some((source, message)) = record.cache.take() {
            return record.forward(source, message);
        }
        if record.requests.values().all(|r| !r.timer_active()) {
            record.expired_all = true;
        }
        Decision::NoOp
    }

    /// Timers that are still armed, in `(timestamp, priority)` order.
    pub fn active_timers(&self) -> Vec<(LogicalTimestamp, Priority, Instant)> {
        self.records
            .values()
            .flat_map(|rec| {
                rec.requests
                    .values()
                    .filter(|r| r.timer_active())
                    .map(move |r| (rec.timestamp, r.priority, r.deadline))
            })
            .collect()
    }

    pub fn is_active(&self, t: LogicalTimestamp, priority: Priority) -> bool {
        self.records
            .get(&t)
            .and_then(|rec| rec.requests.get(&priority))
            .is_some_and(|r| r.timer_active())
    }
}
