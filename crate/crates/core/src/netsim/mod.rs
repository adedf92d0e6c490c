//! Network and cloud-service models: RTT sources, traces, bandwidth.

mod latency;
mod service;
mod trace;

pub use latency::{fit_lognormal, lognormal_quantile, LatencyModel, LogNormalFit, Z_P90};
pub use service::{request_response_time, BandwidthModel, CloudService};
pub use trace::{nearest_rank_percentiles, LatencyTrace, TraceSample, TRACE_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum NetsimError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace replay exhausted: draw {index} past {len} samples")]
    TraceExhausted { index: u64, len: usize },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid latency model: {0}")]
    InvalidModel(String),
    #[error("invalid lognormal anchors: {0}")]
    InvalidFit(String),
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
