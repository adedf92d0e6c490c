use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::netsim::{LatencyTrace, TraceSample};

use super::frame::{FrameKind, ProbeFrame, HEADER_LEN, REQUEST_FRAME_LEN};
use super::ProbeError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// `host:port` of a probe server.
    pub target: String,
    pub rate_hz: f64,
    /// Encoded size of each request frame.
    pub frame_bytes: usize,
    pub duration: Duration,
    /// Pause sending while more than this many frames are unacknowledged.
    pub backlog_limit: usize,
    /// How long to wait for outstanding acks after the last send.
    pub drain_timeout: Duration,
}

impl ProbeConfig {
    pub fn new(target: impl Into<String>) -> Self {
        ProbeConfig {
            target: target.into(),
            rate_hz: 30.0,
            frame_bytes: REQUEST_FRAME_LEN,
            duration: Duration::from_secs(10),
            backlog_limit: 30,
            drain_timeout: Duration::from_secs(5),
        }
    }

    fn validate(&self) -> Result<(), ProbeError> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(ProbeError::InvalidConfig(format!("rate must be positive, got {}", self.rate_hz)));
        }
        if self.frame_bytes < HEADER_LEN {
            return Err(ProbeError::InvalidConfig(format!("frame size must be at least {HEADER_LEN} bytes")));
        }
        if self.backlog_limit == 0 {
            return Err(ProbeError::InvalidConfig("backlog limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// A stretch during which the client stopped sending because of backlog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauseMark {
    /// Last seq sent before the pause.
    pub after_seq: u64,
    pub start_offset_ms: f64,
    pub duration_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trace: LatencyTrace,
    pub sent: u64,
    /// Frames never acknowledged before the drain timeout.
    pub lost: u64,
    /// Acks whose seq or echoed send time did not match an outstanding request.
    pub unmatched_acks: u64,
    pub pauses: Vec<PauseMark>,
    /// Largest in-flight count seen at any send decision.
    pub max_in_flight_at_decision: usize,
    /// Largest delay between a scheduled send instant and the actual send, outside pauses.
    pub max_schedule_lag_ms: f64,
}

#[derive(Default)]
struct Ledger {
    in_flight: BTreeMap<u64, (u64, u64)>,
    samples: Vec<TraceSample>,
    unmatched: u64,
    disconnected: bool,
}

type Shared = Arc<(Mutex<Ledger>, Condvar)>;

/// Runs one probe session against `config.target`.
///
/// On a mid-run disconnect the samples gathered so far are returned inside
/// [`ProbeError::Disconnected`].
pub fn run_probe(config: &ProbeConfig) -> Result<ProbeReport, ProbeError> {
    config.validate()?;
    let stream = TcpStream::connect(&config.target)?;
    stream.set_nodelay(true)?;
    let shared: Shared = Arc::new((Mutex::new(Ledger::default()), Condvar::new()));
    let start = Instant::now();

    let receiver = {
        let read_half = stream.try_clone()?;
        let shared = Arc::clone(&shared);
        thread::spawn(move || receive_acks(read_half, start, shared))
    };

    let mut writer = BufWriter::new(stream.try_clone()?);
    let period = Duration::from_secs_f64(1.0 / config.rate_hz);
    let total_slots = (config.duration.as_secs_f64() * config.rate_hz - 1e-9).ceil().max(0.0) as u64;
    let mut report = ProbeReport {
        trace: LatencyTrace::default(),
        sent: 0,
        lost: 0,
        unmatched_acks: 0,
        pauses: Vec::new(),
        max_in_flight_at_decision: 0,
        max_schedule_lag_ms: 0.0,
    };

    let mut slot: u64 = 0;
    let mut disconnected = false;
    while slot < total_slots {
        let scheduled = Duration::from_secs_f64(slot as f64 / config.rate_hz);
        let now = start.elapsed();
        if scheduled > now {
            thread::sleep(scheduled - now);
        }

        let (lock, cvar) = &*shared;
        let mut ledger = lock.lock().expect("ledger lock");
        if ledger.disconnected {
            disconnected = true;
            break;
        }
        let in_flight = ledger.in_flight.len();
        report.max_in_flight_at_decision = report.max_in_flight_at_decision.max(in_flight);
        if in_flight > config.backlog_limit {
            let pause_start = start.elapsed();
            ledger = cvar
                .wait_while(ledger, |l| !l.in_flight.is_empty() && !l.disconnected)
                .expect("ledger lock");
            let resumed = start.elapsed();
            report.pauses.push(PauseMark {
                after_seq: report.sent.saturating_sub(1),
                start_offset_ms: pause_start.as_secs_f64() * 1e3,
                duration_ms: (resumed - pause_start).as_secs_f64() * 1e3,
            });
            log::info!("backlog pause of {:.1} ms after seq {}", (resumed - pause_start).as_secs_f64() * 1e3, report.sent);
            drop(ledger);
            // skip the slots that passed while paused
            slot = (resumed.as_nanos() / period.as_nanos()) as u64 + 1;
            continue;
        }

        let seq = report.sent;
        let send_offset = start.elapsed();
        let send_ns = send_offset.as_nanos() as u64;
        let unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        ledger.in_flight.insert(seq, (send_ns, unix_ms));
        drop(ledger);

        let lag_ms = send_offset.saturating_sub(scheduled).as_secs_f64() * 1e3;
        report.max_schedule_lag_ms = report.max_schedule_lag_ms.max(lag_ms);

        let frame = ProbeFrame::request(seq, send_ns, config.frame_bytes);
        if frame.write_to(&mut writer).and_then(|_| writer.flush()).is_err() {
            disconnected = true;
            report.sent += 1;
            break;
        }
        report.sent += 1;
        slot += 1;
    }

    if !disconnected {
        let (lock, cvar) = &*shared;
        let ledger = lock.lock().expect("ledger lock");
        let (ledger, _) = cvar
            .wait_timeout_while(ledger, config.drain_timeout, |l| !l.in_flight.is_empty() && !l.disconnected)
            .expect("ledger lock");
        disconnected = ledger.disconnected && !ledger.in_flight.is_empty();
    }
    let _ = stream.shutdown(Shutdown::Both);
    let _ = receiver.join();

    let (lock, _) = &*shared;
    let mut ledger = lock.lock().expect("ledger lock");
    let mut samples = std::mem::take(&mut ledger.samples);
    samples.sort_by_key(|s| s.seq);
    report.trace = LatencyTrace::new(samples)?;
    report.lost = ledger.in_flight.len() as u64;
    report.unmatched_acks = ledger.unmatched;

    if disconnected {
        Err(ProbeError::Disconnected(Box::new(report)))
    } else {
        Ok(report)
    }
}

fn receive_acks(stream: TcpStream, start: Instant, shared: Shared) {
    let mut reader = BufReader::new(stream);
    let (lock, cvar) = &*shared;
    loop {
        let frame = ProbeFrame::read_from(&mut reader);
        let arrived_ns = start.elapsed().as_nanos() as u64;
        let mut ledger = lock.lock().expect("ledger lock");
        match frame {
            Ok(Some(ack)) if ack.kind == FrameKind::Ack => {
                match ledger.in_flight.get(&ack.seq).copied() {
                    Some((send_ns, unix_ms)) if send_ns == ack.client_send_ns => {
                        ledger.in_flight.remove(&ack.seq);
                        let rtt_ms = (arrived_ns.saturating_sub(send_ns) as f64 / 1e6).max(1e-3);
                        ledger.samples.push(TraceSample { seq: ack.seq, send_unix_ms: unix_ms, rtt_ms });
                    }
                    _ => ledger.unmatched += 1,
                }
                cvar.notify_all();
            }
            Ok(Some(_)) => {
                ledger.unmatched += 1;
            }
            Ok(None) | Err(_) => {
                ledger.disconnected = true;
                cvar.notify_all();
                return;
            }
        }
    }
}
