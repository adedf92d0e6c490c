//! Recorded latency traces and their CSV form.
//!
//! The CSV layout is shared with the probe client:
//!
//! ```text
//! seq,send_unix_ms,rtt_ms
//! 0,1700000000000,68.125
//! ```
//!
//! `rtt_ms` is always written with three decimals.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetsimError;

pub const TRACE_HEADER: [&str; 3] = ["seq", "send_unix_ms", "rtt_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub seq: u64,
    pub send_unix_ms: u64,
    pub rtt_ms: f64,
}

/// An ordered list of RTT samples with strictly increasing `seq`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TraceSample>", into = "Vec<TraceSample>")]
pub struct LatencyTrace {
    samples: Vec<TraceSample>,
}

impl TryFrom<Vec<TraceSample>> for LatencyTrace {
    type Error = NetsimError;

    fn try_from(samples: Vec<TraceSample>) -> Result<Self, Self::Error> {
        LatencyTrace::new(samples)
    }
}

impl From<LatencyTrace> for Vec<TraceSample> {
    fn from(trace: LatencyTrace) -> Self {
        trace.samples
    }
}

impl LatencyTrace {
    pub fn new(samples: Vec<TraceSample>) -> Result<Self, NetsimError> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.rtt_ms > 0.0) {
                return Err(NetsimError::InvalidTrace(format!("row {i}: rtt_ms must be > 0, got {}", s.rtt_ms)));
            }
            if i > 0 && s.seq <= samples[i - 1].seq {
                return Err(NetsimError::InvalidTrace(format!(
                    "row {i}: seq {} does not increase (previous {})",
                    s.seq,
                    samples[i - 1].seq
                )));
            }
        }
        Ok(LatencyTrace { samples })
    }

    /// Convenience constructor: sequential seq numbers, zero send instants.
    pub fn from_rtts(rtts: &[f64]) -> Result<Self, NetsimError> {
        Self::new(
            rtts.iter()
                .enumerate()
                .map(|(i, &rtt_ms)| TraceSample { seq: i as u64, send_unix_ms: 0, rtt_ms })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rtts(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.rtt_ms)
    }

    /// Nearest-rank percentiles: the `ceil(q/100 * n)`-th order statistic (1-based, at least 1).
    pub fn percentiles(&self, qs: &[f64]) -> Result<Vec<f64>, NetsimError> {
        let mut sorted: Vec<f64> = self.rtts().collect();
        nearest_rank_percentiles(&mut sorted, qs)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), NetsimError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        for s in &self.samples {
            w.write_record([s.seq.to_string(), s.send_unix_ms.to_string(), format!("{:.3}", s.rtt_ms)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, NetsimError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(NetsimError::InvalidTrace(format!(
                "expected header {}, found {}",
                TRACE_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for row in r.deserialize() {
            let s: TraceSample = row?;
            samples.push(s);
        }
        Self::new(samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetsimError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetsimError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Sorts `values` in place and returns the nearest-rank percentile for each `q` in `[0, 100]`.
pub fn nearest_rank_percentiles(values: &mut [f64], qs: &[f64]) -> Result<Vec<f64>, NetsimError> {
    if values.is_empty() {
        return Err(NetsimError::EmptyTrace);
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    qs.iter()
        .map(|&q| {
            if !(0.0..=100.0).contains(&q) {
                return Err(NetsimError::InvalidPercentile(q));
            }
            let rank = ((q / 100.0) * n as f64).ceil() as usize;
            Ok(values[rank.clamp(1, n) - 1])
        })
        .collect()
}
