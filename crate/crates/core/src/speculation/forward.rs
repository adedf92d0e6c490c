//! Single-timestamp forward prediction.
//!
//! [`effective_forward_time`] answers "when, and from whom, does timestamp `t`
//! get its result?" in closed form. [`simulate_timestamp`] answers the same
//! question by replaying the events through a [`Collator`]. Requests are all
//! dispatched at instant zero.

use serde::{Deserialize, Serialize};

use crate::dataflow::LogicalTimestamp;
use crate::time::{Instant, Span};

use super::collation::{Collator, Decision, ResultSource};
use super::Priority;

/// One cloud request: response after `rtt_ms` (infinite = lost), relative deadline `deadline_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestTiming {
    pub rtt_ms: f64,
    pub deadline_ms: f64,
    pub priority: Priority,
}

impl RequestTiming {
    pub fn new(rtt_ms: f64, deadline_ms: f64, priority: i32) -> Self {
        RequestTiming { rtt_ms, deadline_ms, priority: Priority::new(priority) }
    }

    fn arrival(&self) -> Instant {
        Instant::ZERO + Span::from_ms(self.rtt_ms)
    }

    fn deadline(&self) -> Instant {
        Instant::ZERO + Span::from_ms(self.deadline_ms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForwardPoint {
    pub instant: Instant,
    pub source: ResultSource,
}

/// Closed-form forward instant and winner for one timestamp.
///
/// A result `r` available at `t_r` goes out no later than the moment every
/// higher-priority request has resolved (arrived or timed out); any armed
/// timer that fires while something is available forces a forward too. The
/// forward instant is the earliest such moment, and the winner is the best
/// result available then.
pub fn effective_forward_time(local_latency_ms: f64, requests: &[RequestTiming]) -> ForwardPoint {
    let local_at = Instant::ZERO + Span::from_ms(local_latency_ms);

    // (priority, availability instant) of every result that can be used
    let mut available: Vec<(Priority, Instant)> = vec![(Priority::LOCAL, local_at)];
    available.extend(
        requests
            .iter()
            .filter(|r| r.arrival() <= r.deadline())
            .map(|r| (r.priority, r.arrival())),
    );

    let resolved = |r: &RequestTiming| r.arrival().min(r.deadline());

    let by_arrival = available.iter().map(|&(prio, at)| {
        requests
            .iter()
            .filter(|r| r.priority > prio)
            .map(resolved)
            .fold(at, Instant::max)
    });
    let earliest_available = available.iter().map(|&(_, at)| at).min().expect("local is always available");
    let by_timer = requests
        .iter()
        .map(|r| r.deadline())
        .filter(|&d| earliest_available <= d);

    let instant = by_arrival.chain(by_timer).min().expect("at least the local candidate");
    let winner = available
        .iter()
        .filter(|&&(_, at)| at <= instant)
        .map(|&(prio, _)| prio)
        .max()
        .expect("something is available at the forward instant");
    let source = if winner == Priority::LOCAL { ResultSource::Local } else { ResultSource::Cloud(winner) };
    ForwardPoint { instant, source }
}

/// Trace of replaying one timestamp through a [`Collator`].
#[derive(Clone, Debug, PartialEq)]
pub struct TimestampReplay {
    /// Every transition in processing order: `(instant, event, decision)`.
    pub steps: Vec<(Instant, &'static str, &'static str)>,
    pub forwards: Vec<ForwardPoint>,
}

impl TimestampReplay {
    pub fn first_forward(&self) -> Option<ForwardPoint> {
        self.forwards.first().copied()
    }
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Cloud(usize),
    Local,
    Timer(usize),
}

impl Ev {
    // same-instant order: responses, then the local result, then timers
    fn rank(self) -> u8 {
        match self {
            Ev::Cloud(_) => 0,
            Ev::Local => 1,
            Ev::Timer(_) => 2,
        }
    }
}

/// Event-driven replay of one timestamp. `local_latency_ms = None` means the
/// local callback never produces a result.
pub fn simulate_timestamp(local_latency_ms: Option<f64>, requests: &[RequestTiming]) -> TimestampReplay {
    let t = LogicalTimestamp(0);
    let mut collator: Collator<ResultSource> = Collator::new();
    let mut events: Vec<(Instant, u8, usize, Ev)> = Vec::new();
    let push = |at: Instant, ev: Ev, events: &mut Vec<(Instant, u8, usize, Ev)>| {
        let seq = events.len();
        events.push((at, ev.rank(), seq, ev));
    };
    for (i, r) in requests.iter().enumerate() {
        collator
            .register_request(t, r.priority, r.deadline())
            .expect("request priorities are distinct and above local");
        push(r.deadline(), Ev::Timer(i), &mut events);
        if r.rtt_ms.is_finite() {
            push(r.arrival(), Ev::Cloud(i), &mut events);
        }
    }
    if let Some(local) = local_latency_ms {
        push(Instant::ZERO + Span::from_ms(local), Ev::Local, &mut events);
    }
    events.sort_by_key(|&(at, rank, seq, _)| (at, rank, seq));

    let mut replay = TimestampReplay { steps: Vec::new(), forwards: Vec::new() };
    for (at, _, _, ev) in events {
        let (name, decision) = match ev {
            Ev::Cloud(i) => {
                let p = requests[i].priority;
                ("cloud_resp", collator.on_cloud_response(t, p, ResultSource::Cloud(p)))
            }
            Ev::Local => ("local_done", collator.on_local_result(t, ResultSource::Local)),
            Ev::Timer(i) => ("timer_fire", collator.on_timer_fire(t, requests[i].priority)),
        };
        replay.steps.push((at, name, decision.label()));
        if let Decision::Forward { source, .. } = decision {
            replay.forwards.push(ForwardPoint { instant: at, source });
        }
    }
    replay
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: f64) -> Instant {
        Instant::from_ms(v)
    }

    #[test]
    fn closed_form_single_request_cases() {
        let fast = effective_forward_time(301.7, &[RequestTiming::new(102.2 + 68.0, 250.0, 1)]);
        assert_eq!(fast, ForwardPoint { instant: ms(170.2), source: ResultSource::Cloud(Priority::new(1)) });

        let tail = effective_forward_time(301.7, &[RequestTiming::new(3027.0, 250.0, 1)]);
        assert_eq!(tail, ForwardPoint { instant: ms(301.7), source: ResultSource::Local });

        let plain = effective_forward_time(301.7, &[]);
        assert_eq!(plain, ForwardPoint { instant: ms(301.7), source: ResultSource::Local });

        // local finishes before the deadline: cached, forwarded when the timer fires
        let waits = effective_forward_time(100.0, &[RequestTiming::new(3027.0, 250.0, 1)]);
        assert_eq!(waits, ForwardPoint { instant: ms(250.0), source: ResultSource::Local });
    }

    #[test]
    fn replay_matches_spot_cases() {
        let r = simulate_timestamp(Some(301.7), &[RequestTiming::new(68.0, 250.0, 1)]);
        assert_eq!(r.forwards, vec![ForwardPoint { instant: ms(68.0), source: ResultSource::Cloud(Priority::new(1)) }]);

        // cache empty at the fire; local forwarded when it completes
        let r = simulate_timestamp(Some(301.7), &[RequestTiming::new(3027.0, 250.0, 1)]);
        assert_eq!(r.forwards, vec![ForwardPoint { instant: ms(301.7), source: ResultSource::Local }]);
        assert!(r.steps.iter().any(|s| *s == (ms(250.0), "timer_fire", "noop")));
        assert!(r.steps.iter().any(|s| *s == (ms(3027.0), "cloud_resp", "drop")));
    }

    #[test]
    fn arrival_at_deadline_counts_as_on_time() {
        let r = simulate_timestamp(Some(500.0), &[RequestTiming::new(250.0, 250.0, 1)]);
        assert_eq!(r.first_forward().unwrap().source, ResultSource::Cloud(Priority::new(1)));
        let cf = effective_forward_time(500.0, &[RequestTiming::new(250.0, 250.0, 1)]);
        assert_eq!(cf.source, ResultSource::Cloud(Priority::new(1)));
    }

    #[test]
    fn higher_priority_preferred_when_both_in_time() {
        let reqs = [RequestTiming::new(50.0, 250.0, 1), RequestTiming::new(100.0, 250.0, 2)];
        let expected = ForwardPoint { instant: ms(100.0), source: ResultSource::Cloud(Priority::new(2)) };
        assert_eq!(effective_forward_time(301.7, &reqs), expected);
        assert_eq!(simulate_timestamp(Some(301.7), &reqs).forwards, vec![expected]);
    }
}
