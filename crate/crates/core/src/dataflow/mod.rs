//! Operator/stream dataflow substrate.
//!
//! A [`Graph`] holds operators connected by statically-typed streams. Running
//! it delivers every message to the receivers' callbacks in clock order and
//! stamps each delivery with the receiving operator's [`LogicalTimestamp`].

mod graph;
mod log;
mod runtime;

use std::any::{Any, TypeId};
use std::fmt;
use std::sync::Arc;

pub use self::graph::{Graph, OperatorSpec};
pub use self::log::{ExecutionLog, LogEntry, LOG_HEADER};
pub use self::runtime::{ClockMode, Context, RunConfig, SetupContext, Until};

use crate::speculation::SpeculationError;
use crate::time::Instant;

/// Count of messages an operator has received, assigned 0, 1, 2, ... on receipt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct LogicalTimestamp(pub u64);

impl fmt::Display for LogicalTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperatorId(pub String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId(pub String);

impl From<&str> for OperatorId {
    fn from(s: &str) -> Self {
        OperatorId(s.to_owned())
    }
}

impl From<&str> for StreamId {
    fn from(s: &str) -> Self {
        StreamId(s.to_owned())
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Runtime type identity of a stream's messages.
#[derive(Clone, Copy, Debug)]
pub struct TypeTag {
    id: TypeId,
    name: &'static str,
}

impl TypeTag {
    pub fn of<T: Any>() -> Self {
        TypeTag { id: TypeId::of::<T>(), name: std::any::type_name::<T>() }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }
}

impl PartialEq for TypeTag {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for TypeTag {}

/// An in-process message value tagged with its type. Cloning shares the value.
#[derive(Clone)]
pub struct Payload {
    tag: TypeTag,
    value: Arc<dyn Any + Send + Sync>,
}

impl Payload {
    pub fn new<T: Any + Send + Sync>(value: T) -> Self {
        Payload { tag: TypeTag::of::<T>(), value: Arc::new(value) }
    }

    pub fn tag(&self) -> TypeTag {
        self.tag
    }

    pub fn get<T: Any>(&self) -> Option<&T> {
        self.value.downcast_ref::<T>()
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload<{}>", self.tag.name)
    }
}

/// A message as seen by a receiving operator.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub stream: StreamId,
    pub timestamp: LogicalTimestamp,
    pub payload: Payload,
    pub emit_time: Instant,
}

impl Envelope {
    pub fn get<T: Any>(&self) -> Option<&T> {
        self.payload.get::<T>()
    }
}

/// Failure reported by an operator callback.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct OperatorError(pub String);

impl OperatorError {
    pub fn new(msg: impl Into<String>) -> Self {
        OperatorError(msg.into())
    }
}

/// An operator's callbacks. `setup` runs exactly once, before any message.
pub trait Operator: Send {
    fn setup(&mut self, _ctx: &mut SetupContext<'_>) -> Result<(), OperatorError> {
        Ok(())
    }

    fn on_message(&mut self, env: &Envelope, ctx: &mut Context<'_>) -> Result<(), OperatorError>;

    /// Invoked at instants requested through `schedule_tick`.
    fn on_tick(&mut self, _ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataflowError {
    #[error("operator `{0}` already exists")]
    DuplicateOperator(OperatorId),
    #[error("unknown operator `{0}`")]
    UnknownOperator(OperatorId),
    #[error("stream `{0}` already has a sender")]
    DuplicateStream(StreamId),
    #[error("operator `{op}` does not send on stream `{stream}`")]
    NotASender { op: OperatorId, stream: StreamId },
    #[error("operator `{op}` does not declare `{stream}` as an input")]
    NotAnInput { op: OperatorId, stream: StreamId },
    #[error("stream `{stream}` carries {found}, receiver expects {expected}")]
    TypeMismatch { stream: StreamId, expected: &'static str, found: &'static str },
    #[error("input stream `{stream}` of `{op}` has no sender")]
    DanglingInput { op: OperatorId, stream: StreamId },
    #[error("setup of `{op}` failed: {source}")]
    Setup { op: OperatorId, source: OperatorError },
    #[error("cloud registration for `{op}` rejected: {source}")]
    Registration { op: OperatorId, source: SpeculationError },
}
