//! TCP latency probe: a client that streams fixed-size frames at a fixed rate
//! and an echo server that acknowledges each one. The client records per-frame
//! round trips into a [`LatencyTrace`](crate::netsim::LatencyTrace).

mod client;
mod frame;
mod server;

pub use client::{run_probe, PauseMark, ProbeConfig, ProbeReport};
pub use frame::{FrameKind, ProbeFrame, ACK_FRAME_LEN, HEADER_LEN, MAGIC, MAX_PAYLOAD_LEN, REQUEST_FRAME_LEN};
pub use server::{ProbeServer, ServerHandle, ServerOptions, Stall};

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("invalid probe config: {0}")]
    InvalidConfig(String),
    #[error("connection lost after {} samples", .0.trace.len())]
    Disconnected(Box<ProbeReport>),
    #[error(transparent)]
    Trace(#[from] crate::netsim::NetsimError),
}
