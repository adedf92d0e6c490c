//! Speculative cloud execution for dataflow operators.
//!
//! An operator attaches cloud implementations in its `setup` via
//! [`SetupContext::use_cloud`](crate::dataflow::SetupContext::use_cloud).
//! For every input message each registration's handler decides whether to
//! send a request and with which relative deadline, while the local callback
//! runs as usual at the lowest priority. A [`Collator`] then guarantees one
//! forwarded result per timestamp: the best one available by the deadline.

mod collation;
mod forward;
mod queue;
mod registration;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use collation::{
    CollationRecord, Collator, Decision, DropReason, PendingRequest, RequestState, ResultSource,
};
pub use forward::{effective_forward_time, simulate_timestamp, ForwardPoint, RequestTiming, TimestampReplay};
pub use queue::{OutboundQueue, QueuedRequest, DEFAULT_DEPTH_THRESHOLD};
pub use registration::{CloudHandle, CloudRegistration, CloudReply, MsgHandler, SimulatedCloud};

use crate::dataflow::LogicalTimestamp;

/// Result preference; larger wins. Local computation is always [`Priority::LOCAL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Priority(i32);

impl Priority {
    pub const LOCAL: Priority = Priority(0);

    pub const fn new(value: i32) -> Self {
        Priority(value)
    }

    pub fn value(self) -> i32 {
        self.0
    }

    pub(crate) fn next(self) -> Priority {
        Priority(self.0.saturating_add(1))
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpeculationError {
    #[error("priority {0} is already registered for this operator")]
    DuplicatePriority(Priority),
    #[error("priority {0} must be above the local priority")]
    PriorityNotAboveLocal(Priority),
    #[error("use_cloud may only be called during setup")]
    OutsideSetup,
    #[error("a cloud-assisted operator needs exactly one output stream, found {0}")]
    OutputArity(usize),
    #[error("request ({timestamp}, {priority}) already indexed")]
    DuplicateRequest { timestamp: LogicalTimestamp, priority: Priority },
    #[error("timestamp {0} was already forwarded")]
    AlreadyForwarded(LogicalTimestamp),
}
