//! Deadline-bounded speculative cloud offloading for dataflow pipelines.
//!
//! * [`dataflow`]: typed operator graph and discrete-event runtime.
//! * [`speculation`]: cloud registrations, deadlines and result collation.
//! * [`netsim`]: RTT models, traces and cloud-service timing.
//! * [`probe`]: real-network RTT client/server.
//! * [`scenarios`]: kinematic driving scenarios and the collision sweep.

pub mod dataflow;
pub mod netsim;
pub mod probe;
pub mod scenarios;
pub mod speculation;
pub mod time;

pub use time::{Instant, Span};
