//! Single-threaded discrete-event loop.
//!
//! Events are ordered by `(instant, class, insertion)`. At equal instants
//! cloud responses are handled first, then local completions, then message
//! deliveries and ticks, and deadline timers last: a response arriving exactly
//! at its deadline is on time.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use super::graph::Graph;
use super::log::ExecutionLog;
use super::{
    DataflowError, Envelope, LogicalTimestamp, Operator, OperatorError, OperatorId, Payload, StreamId, TypeTag,
};
use crate::speculation::{CloudRegistration, Collator, Decision, Priority, ResultSource, SpeculationError};
use crate::time::{Instant, Span};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClockMode {
    #[default]
    Simulated,
    /// Event instants are honoured against the wall clock (sleeping as needed).
    Real,
}

pub enum Until {
    /// Run until no events remain.
    Idle,
    /// Process events at or before this instant.
    Time(Instant),
    /// Stop after this many events.
    Events(usize),
    /// Stop as soon as the predicate holds after an event.
    Condition(Box<dyn FnMut(&ExecutionLog) -> bool + Send>),
}

pub struct RunConfig {
    pub clock: ClockMode,
    pub until: Until,
}

impl RunConfig {
    pub fn simulated(until: Until) -> Self {
        RunConfig { clock: ClockMode::Simulated, until }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::simulated(Until::Idle)
    }
}

impl From<SpeculationError> for OperatorError {
    fn from(e: SpeculationError) -> Self {
        OperatorError(e.to_string())
    }
}

/// Handed to [`Operator::setup`]; the only place cloud registrations are accepted.
pub struct SetupContext<'a> {
    op: &'a OperatorId,
    outputs: &'a [(StreamId, TypeTag)],
    registrations: &'a mut Vec<CloudRegistration>,
    ticks: &'a mut Vec<Instant>,
}

impl SetupContext<'_> {
    pub fn operator(&self) -> &OperatorId {
        self.op
    }

    /// Attaches a cloud implementation. Returns the registration's index.
    pub fn use_cloud(&mut self, registration: CloudRegistration) -> Result<usize, SpeculationError> {
        if registration.priority <= Priority::LOCAL {
            return Err(SpeculationError::PriorityNotAboveLocal(registration.priority));
        }
        if self.registrations.iter().any(|r| r.priority == registration.priority) {
            return Err(SpeculationError::DuplicatePriority(registration.priority));
        }
        if self.outputs.len() != 1 {
            return Err(SpeculationError::OutputArity(self.outputs.len()));
        }
        self.registrations.push(registration);
        Ok(self.registrations.len() - 1)
    }

    pub fn schedule_tick(&mut self, at: Instant) {
        self.ticks.push(at);
    }
}

/// Handed to message and tick callbacks.
pub struct Context<'a> {
    now: Instant,
    timestamp: Option<LogicalTimestamp>,
    elapsed: Span,
    outputs: &'a [(StreamId, TypeTag)],
    sends: Vec<(Instant, StreamId, Payload)>,
    ticks: Vec<Instant>,
}

impl<'a> Context<'a> {
    fn new(now: Instant, timestamp: Option<LogicalTimestamp>, outputs: &'a [(StreamId, TypeTag)]) -> Self {
        Context { now, timestamp, elapsed: Span::ZERO, outputs, sends: Vec::new(), ticks: Vec::new() }
    }

    /// Instant the callback started.
    pub fn now(&self) -> Instant {
        self.now
    }

    /// Logical timestamp of the message being handled; `None` in ticks.
    pub fn timestamp(&self) -> Option<LogicalTimestamp> {
        self.timestamp
    }

    /// Accounts `ms` of local compute; later sends leave that much later.
    pub fn elapse(&mut self, ms: f64) {
        self.elapsed = self.elapsed + Span::from_ms(ms);
    }

    pub fn elapsed(&self) -> Span {
        self.elapsed
    }

    pub fn send<T: std::any::Any + Send + Sync>(&mut self, stream: &str, value: T) -> Result<(), OperatorError> {
        self.send_payload(stream, Payload::new(value))
    }

    pub fn send_payload(&mut self, stream: &str, payload: Payload) -> Result<(), OperatorError> {
        let Some((sid, tag)) = self.outputs.iter().find(|(s, _)| s.0 == stream) else {
            return Err(OperatorError(format!("not a sender of stream `{stream}`")));
        };
        if *tag != payload.tag() {
            return Err(OperatorError(format!(
                "stream `{stream}` carries {}, got {}",
                tag.name(),
                payload.tag().name()
            )));
        }
        self.sends.push((self.now + self.elapsed, sid.clone(), payload));
        Ok(())
    }

    pub fn schedule_tick(&mut self, at: Instant) {
        self.ticks.push(at);
    }

    /// Registrations are fixed after setup.
    pub fn use_cloud(&mut self, _registration: CloudRegistration) -> Result<usize, SpeculationError> {
        Err(SpeculationError::OutsideSetup)
    }
}

struct CloudState {
    registrations: Vec<CloudRegistration>,
    collator: Collator<Payload>,
    output: (StreamId, TypeTag),
}

struct Slot {
    id: OperatorId,
    operator: Box<dyn Operator>,
    outputs: Vec<(StreamId, TypeTag)>,
    next_timestamp: u64,
    halted: bool,
    cloud: Option<CloudState>,
}

enum Event {
    CloudResponse { op: usize, t: LogicalTimestamp, priority: Priority, payload: Payload },
    LocalDone { op: usize, t: LogicalTimestamp, payload: Payload },
    Emit { op: usize, stream: StreamId, payload: Payload },
    Tick { op: usize },
    Timer { op: usize, t: LogicalTimestamp, priority: Priority },
}

impl Event {
    fn class(&self) -> u8 {
        match self {
            Event::CloudResponse { .. } => 0,
            Event::LocalDone { .. } => 1,
            Event::Emit { .. } | Event::Tick { .. } => 2,
            Event::Timer { .. } => 3,
        }
    }
}

#[derive(Default)]
struct Agenda {
    events: BTreeMap<(Instant, u8, u64), Event>,
    seq: u64,
}

impl Agenda {
    fn push(&mut self, at: Instant, ev: Event) {
        self.seq += 1;
        self.events.insert((at, ev.class(), self.seq), ev);
    }

    fn peek_instant(&self) -> Option<Instant> {
        self.events.keys().next().map(|k| k.0)
    }

    fn pop(&mut self) -> Option<(Instant, Event)> {
        self.events.pop_first().map(|((at, _, _), ev)| (at, ev))
    }
}

struct Runner {
    slots: Vec<Slot>,
    receivers: BTreeMap<StreamId, Vec<usize>>,
    agenda: Agenda,
    log: ExecutionLog,
}

impl Graph {
    /// Runs setup hooks, then processes events until `config.until` holds.
    pub fn run(self, config: RunConfig) -> Result<ExecutionLog, DataflowError> {
        self.validate()?;
        let Graph { operators, index, streams } = self;
        let receivers = streams
            .iter()
            .map(|(sid, info)| (sid.clone(), info.receivers.iter().map(|r| index[r]).collect()))
            .collect();
        let slots = operators
            .into_iter()
            .map(|spec| Slot {
                id: spec.id,
                operator: spec.operator,
                outputs: spec.outputs,
                next_timestamp: 0,
                halted: false,
                cloud: None,
            })
            .collect();
        let mut runner = Runner { slots, receivers, agenda: Agenda::default(), log: ExecutionLog::default() };
        runner.setup()?;
        runner.run(config);
        Ok(runner.log)
    }
}

impl Runner {
    fn setup(&mut self) -> Result<(), DataflowError> {
        for (idx, slot) in self.slots.iter_mut().enumerate() {
            let mut registrations = Vec::new();
            let mut ticks = Vec::new();
            let mut ctx = SetupContext {
                op: &slot.id,
                outputs: &slot.outputs,
                registrations: &mut registrations,
                ticks: &mut ticks,
            };
            slot.operator
                .setup(&mut ctx)
                .map_err(|source| DataflowError::Setup { op: slot.id.clone(), source })?;
            let detail = if registrations.is_empty() {
                String::new()
            } else {
                let names: Vec<String> = registrations
                    .iter()
                    .map(|r| format!("{}@{}", r.handle.name(), r.priority))
                    .collect();
                format!("cloud={}", names.join(";"))
            };
            self.log.push(Instant::ZERO, &slot.id.0, "setup", None, detail);
            if !registrations.is_empty() {
                let output = slot.outputs[0].clone();
                slot.cloud = Some(CloudState { registrations, collator: Collator::new(), output });
            }
            for at in ticks {
                self.agenda.push(at, Event::Tick { op: idx });
            }
        }
        Ok(())
    }

    fn run(&mut self, mut config: RunConfig) {
        let wall_start = std::time::Instant::now();
        let mut processed = 0usize;
        while let Some(at) = self.agenda.peek_instant() {
            match &config.until {
                Until::Time(limit) if at > *limit => break,
                Until::Events(n) if processed >= *n => break,
                _ => {}
            }
            if config.clock == ClockMode::Real {
                let target = wall_start + std::time::Duration::from_micros(at.as_us());
                let now = std::time::Instant::now();
                if target > now {
                    std::thread::sleep(target - now);
                }
            }
            let (at, ev) = self.agenda.pop().expect("peeked");
            self.process(at, ev);
            processed += 1;
            if let Until::Condition(pred) = &mut config.until {
                if pred(&self.log) {
                    break;
                }
            }
        }
    }

    fn process(&mut self, now: Instant, ev: Event) {
        match ev {
            Event::Emit { op, stream, payload } => self.emit(op, stream, payload, now),
            Event::Tick { op } => {
                if self.slots[op].halted {
                    return;
                }
                self.log.push(now, &self.slots[op].id.0, "tick", None, "");
                self.invoke(op, now, None);
            }
            Event::LocalDone { op, t, payload } => {
                let Some(cloud) = self.slots[op].cloud.as_mut() else { return };
                let decision = cloud.collator.on_local_result(t, payload);
                self.settle(op, now, t, "local_done", String::new(), decision);
            }
            Event::CloudResponse { op, t, priority, payload } => {
                let slot = &mut self.slots[op];
                let Some(cloud) = slot.cloud.as_mut() else { return };
                if payload.tag() != cloud.output.1 {
                    self.log.push(
                        now,
                        &slot.id.0,
                        "cloud_resp",
                        Some(t.0),
                        format!("p={priority} decision=drop reason=type {}", payload.tag().name()),
                    );
                    return;
                }
                let decision = cloud.collator.on_cloud_response(t, priority, payload);
                self.settle(op, now, t, "cloud_resp", format!("p={priority} "), decision);
            }
            Event::Timer { op, t, priority } => {
                let Some(cloud) = self.slots[op].cloud.as_mut() else { return };
                if !cloud.collator.is_active(t, priority) {
                    return;
                }
                let decision = cloud.collator.on_timer_fire(t, priority);
                self.settle(op, now, t, "timer_fire", format!("p={priority} "), decision);
            }
        }
    }

    /// Logs a collation decision and performs the forward, if any.
    fn settle(
        &mut self,
        op: usize,
        now: Instant,
        t: LogicalTimestamp,
        event: &'static str,
        prefix: String,
        decision: Decision<Payload>,
    ) {
        let slot = &self.slots[op];
        let mut detail = format!("{prefix}decision={}", decision.label());
        if let Decision::Forward { source, .. } = &decision {
            detail.push_str(&match source {
                ResultSource::Local => " source=local".to_owned(),
                ResultSource::Cloud(p) => format!(" source=cloud:{p}"),
            });
        }
        if let Decision::Drop(reason) = &decision {
            detail.push_str(&format!(" reason={reason:?}"));
        }
        self.log.push(now, &slot.id.0, event, Some(t.0), detail);
        if let Decision::Forward { message, .. } = decision {
            let stream = slot.cloud.as_ref().expect("collating operator").output.0.clone();
            self.emit(op, stream, message, now);
        }
    }

    fn emit(&mut self, op: usize, stream: StreamId, payload: Payload, now: Instant) {
        self.log.push(now, &self.slots[op].id.0, "send", None, format!("stream={stream}"));
        let targets = self.receivers.get(&stream).cloned().unwrap_or_default();
        for r in targets {
            self.deliver(r, &stream, payload.clone(), now);
        }
    }

    fn deliver(&mut self, op: usize, stream: &StreamId, payload: Payload, now: Instant) {
        let slot = &mut self.slots[op];
        if slot.halted {
            return;
        }
        let t = LogicalTimestamp(slot.next_timestamp);
        slot.next_timestamp += 1;
        self.log.push(now, &slot.id.0, "receive", Some(t.0), format!("stream={stream}"));
        if slot.cloud.is_some() {
            self.dispatch(op, t, &payload, now);
        }
        let env = Envelope { stream: stream.clone(), timestamp: t, payload, emit_time: now };
        self.invoke_message(op, now, env);
    }

    /// Runs every registration's handler for message `t` and sends the admitted requests.
    fn dispatch(&mut self, op: usize, t: LogicalTimestamp, payload: &Payload, now: Instant) {
        let slot = &mut self.slots[op];
        let cloud = slot.cloud.as_mut().expect("checked by caller");
        for reg in cloud.registrations.iter_mut() {
            let p = reg.priority;
            let handled = catch_unwind(AssertUnwindSafe(|| (reg.msg_handler)(payload, t)))
                .unwrap_or_else(|_| Err("handler panicked".to_owned()));
            let (request, deadline_ms) = match handled {
                Ok(Some(x)) => x,
                Ok(None) => continue,
                Err(e) => {
                    self.log.push(now, &slot.id.0, "handler_error", Some(t.0), format!("p={p} {e}"));
                    continue;
                }
            };
            if request.tag() != reg.handle.request_type() {
                self.log.push(
                    now,
                    &slot.id.0,
                    "handler_error",
                    Some(t.0),
                    format!("p={p} request type {} != {}", request.tag().name(), reg.handle.request_type().name()),
                );
                continue;
            }
            if !(deadline_ms > 0.0) || !deadline_ms.is_finite() {
                self.log.push(now, &slot.id.0, "handler_error", Some(t.0), format!("p={p} bad deadline {deadline_ms}"));
                continue;
            }
            let bytes = reg.handle.request_bytes(&request);
            let Some(departs) = reg.queue.enqueue(now, bytes) else {
                self.log.push(now, &slot.id.0, "dispatch", Some(t.0), format!("p={p} refused=queue_full"));
                continue;
            };
            let deadline = now + Span::from_ms(deadline_ms);
            if let Err(e) = cloud.collator.register_request(t, p, deadline) {
                self.log.push(now, &slot.id.0, "handler_error", Some(t.0), format!("p={p} {e}"));
                continue;
            }
            self.agenda.push(deadline, Event::Timer { op, t, priority: p });
            let arrival = match reg.handle.invoke(&request, departs) {
                Ok(Some(reply)) => {
                    let at = departs + reply.delay;
                    self.agenda.push(at, Event::CloudResponse { op, t, priority: p, payload: reply.payload });
                    format!("{:.3}", at.as_ms())
                }
                Ok(None) => "lost".to_owned(),
                Err(e) => format!("error({e})"),
            };
            self.log.push(
                now,
                &slot.id.0,
                "dispatch",
                Some(t.0),
                format!("p={p} deadline_ms={:.3} arrival_ms={arrival}", deadline.as_ms()),
            );
        }
    }

    fn invoke_message(&mut self, op: usize, now: Instant, env: Envelope) {
        let slot = &mut self.slots[op];
        let mut ctx = Context::new(now, Some(env.timestamp), &slot.outputs);
        let result = catch_unwind(AssertUnwindSafe(|| slot.operator.on_message(&env, &mut ctx)))
            .unwrap_or_else(|_| Err(OperatorError::new("callback panicked")));
        let (sends, ticks) = (ctx.sends, ctx.ticks);
        self.after_callback(op, now, Some(env.timestamp), result, sends, ticks);
    }

    fn invoke(&mut self, op: usize, now: Instant, timestamp: Option<LogicalTimestamp>) {
        let slot = &mut self.slots[op];
        let mut ctx = Context::new(now, timestamp, &slot.outputs);
        let result = catch_unwind(AssertUnwindSafe(|| slot.operator.on_tick(&mut ctx)))
            .unwrap_or_else(|_| Err(OperatorError::new("callback panicked")));
        let (sends, ticks) = (ctx.sends, ctx.ticks);
        self.after_callback(op, now, None, result, sends, ticks);
    }

    fn after_callback(
        &mut self,
        op: usize,
        now: Instant,
        timestamp: Option<LogicalTimestamp>,
        result: Result<(), OperatorError>,
        sends: Vec<(Instant, StreamId, Payload)>,
        ticks: Vec<Instant>,
    ) {
        if let Err(e) = result {
            let slot = &mut self.slots[op];
            slot.halted = true;
            self.log.push(now, &slot.id.0, "error", timestamp.map(|t| t.0), format!("halted: {e}"));
            return;
        }
        for at in ticks {
            self.agenda.push(at.max(now), Event::Tick { op });
        }
        let collating = self.slots[op].cloud.is_some();
        let mut collated = false;
        for (at, stream, payload) in sends {
            match timestamp {
                Some(t) if collating => {
                    if collated {
                        let slot = &self.slots[op];
                        self.log.push(now, &slot.id.0, "error", Some(t.0), "second send for one timestamp ignored");
                        continue;
                    }
                    collated = true;
                    self.agenda.push(at, Event::LocalDone { op, t, payload });
                }
                _ => self.agenda.push(at, Event::Emit { op, stream, payload }),
            }
        }
    }
}
