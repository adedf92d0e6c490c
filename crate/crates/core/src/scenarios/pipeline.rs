//! Camera → detector → planner graph shared by the driving scenarios.

use std::sync::{Arc, Mutex};

use crate::dataflow::{
    Context, Envelope, Graph, Operator, OperatorError, OperatorSpec, RunConfig, SetupContext, Until,
};
use crate::netsim::{CloudService, LatencyModel};
use crate::speculation::{CloudRegistration, SimulatedCloud};
use crate::time::{Instant, Span};

use super::config::{ExecutionMode, ScenarioConfig};
use super::{FrameRecord, ScenarioError};

#[derive(Clone, Debug)]
pub struct CameraFrame {
    pub index: u64,
    pub capture: Instant,
    pub obstacle_visible: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Local,
    Cloud,
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub frame: u64,
    pub capture: Instant,
    pub detected: bool,
    pub origin: Origin,
}

/// A position report about another road user, received over the network.
#[derive(Clone, Debug)]
pub struct FeedReport {
    pub seq: u64,
    pub sent: Instant,
}

pub struct FeedSpec {
    pub period_ms: f64,
    pub latency: LatencyModel,
}

#[derive(Debug, Default)]
pub struct PlannerState {
    pub brake_at: Option<Instant>,
    pub frames: Vec<FrameRecord>,
}

type Visibility = Box<dyn Fn(Instant) -> bool + Send>;

struct Camera {
    period_ms: f64,
    horizon: Instant,
    next: u64,
    visible: Visibility,
}

impl Operator for Camera {
    fn setup(&mut self, ctx: &mut SetupContext<'_>) -> Result<(), OperatorError> {
        ctx.schedule_tick(Instant::ZERO);
        Ok(())
    }

    fn on_message(&mut self, _env: &Envelope, _ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        let capture = ctx.now();
        let frame = CameraFrame { index: self.next, capture, obstacle_visible: (self.visible)(capture) };
        ctx.send("frames", frame)?;
        self.next += 1;
        let next = Instant::from_ms(self.next as f64 * self.period_ms);
        if next <= self.horizon {
            ctx.schedule_tick(next);
        }
        Ok(())
    }
}

struct CloudPlan {
    service: CloudService,
    local_deadline_ms: f64,
    skipped_deadline_ms: f64,
}

/// Serialized on-vehicle detector: frames arriving while it is busy are skipped.
/// With a [`CloudPlan`] every frame is also sent to the cloud.
struct LocalDetector {
    runtime_ms: f64,
    busy_until: Arc<Mutex<Instant>>,
    cloud: Option<CloudPlan>,
}

fn detect(frame: &CameraFrame, origin: Origin) -> Detection {
    Detection { frame: frame.index, capture: frame.capture, detected: frame.obstacle_visible, origin }
}

fn frame_of(env: &Envelope) -> Result<&CameraFrame, OperatorError> {
    env.get::<CameraFrame>().ok_or_else(|| OperatorError::new("expected a camera frame"))
}

impl Operator for LocalDetector {
    fn setup(&mut self, ctx: &mut SetupContext<'_>) -> Result<(), OperatorError> {
        let Some(plan) = self.cloud.take() else { return Ok(()) };
        let endpoint = SimulatedCloud::new(plan.service, |f: &CameraFrame| detect(f, Origin::Cloud));
        let busy = Arc::clone(&self.busy_until);
        // frames the local detector will skip may wait longer: no local result competes
        let handler = move |f: &CameraFrame, _t| {
            let local_runs = f.capture >= *busy.lock().expect("busy lock");
            let deadline = if local_runs { plan.local_deadline_ms } else { plan.skipped_deadline_ms };
            Some((f.clone(), deadline))
        };
        ctx.use_cloud(CloudRegistration::new(endpoint, 1, handler))?;
        Ok(())
    }

    fn on_message(&mut self, env: &Envelope, ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        let frame = frame_of(env)?;
        let mut busy = self.busy_until.lock().expect("busy lock");
        if ctx.now() < *busy {
            return Ok(());
        }
        *busy = ctx.now() + Span::from_ms(self.runtime_ms);
        drop(busy);
        ctx.elapse(self.runtime_ms);
        ctx.send("detections", detect(frame, Origin::Local))
    }
}

/// Cloud-only baseline: every frame is offloaded and its result delivered
/// whenever it returns, without deadlines or collation.
struct CloudDetector {
    service: CloudService,
}

impl Operator for CloudDetector {
    fn on_message(&mut self, env: &Envelope, ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        let frame = frame_of(env)?;
        let delay = self.service.response_delay_ms(frame.index).map_err(|e| OperatorError::new(e.to_string()))?;
        if !delay.is_finite() {
            return Ok(());
        }
        ctx.elapse(delay);
        ctx.send("detections", detect(frame, Origin::Cloud))
    }
}

struct FeedSource {
    spec: FeedSpec,
    horizon: Instant,
    seq: u64,
}

impl Operator for FeedSource {
    fn setup(&mut self, ctx: &mut SetupContext<'_>) -> Result<(), OperatorError> {
        ctx.schedule_tick(Instant::ZERO);
        Ok(())
    }

    fn on_message(&mut self, _env: &Envelope, _ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        Ok(())
    }

    fn on_tick(&mut self, ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        let sent = ctx.now();
        let rtt = self.spec.latency.sample_rtt(self.seq).map_err(|e| OperatorError::new(e.to_string()))?;
        if rtt.is_finite() {
            ctx.elapse(rtt);
            ctx.send("feed", FeedReport { seq: self.seq, sent })?;
        }
        self.seq += 1;
        let next = Instant::from_ms(self.seq as f64 * self.spec.period_ms);
        if next <= self.horizon {
            ctx.schedule_tick(next);
        }
        Ok(())
    }
}

/// Brakes once `required` consecutive positive detections have been
/// delivered, or on the first feed report.
struct Planner {
    required: u32,
    overhead: Span,
    streak: u32,
    state: Arc<Mutex<PlannerState>>,
}

impl Operator for Planner {
    fn on_message(&mut self, env: &Envelope, ctx: &mut Context<'_>) -> Result<(), OperatorError> {
        let now = ctx.now();
        let mut state = self.state.lock().expect("planner lock");
        let trigger = if let Some(d) = env.get::<Detection>() {
            state.frames.push(FrameRecord {
                frame: d.frame,
                capture_ms: d.capture.as_ms(),
                detected: d.detected,
                delivered_ms: now.as_ms(),
                source: match d.origin {
                    Origin::Local => "local",
                    Origin::Cloud => "cloud",
                }
                .to_owned(),
            });
            self.streak = if d.detected { self.streak + 1 } else { 0 };
            self.streak >= self.required
        } else if let Some(r) = env.get::<FeedReport>() {
            state.frames.push(FrameRecord {
                frame: r.seq,
                capture_ms: r.sent.as_ms(),
                detected: true,
                delivered_ms: now.as_ms(),
                source: "feed".to_owned(),
            });
            true
        } else {
            return Err(OperatorError::new("unexpected planner input"));
        };
        if trigger && state.brake_at.is_none() {
            state.brake_at = Some(now + self.overhead);
        }
        Ok(())
    }
}

/// Runs the perception graph until the horizon and returns what the planner saw.
pub(crate) fn run_perception(
    cfg: &ScenarioConfig,
    mode: &ExecutionMode,
    visible: Visibility,
    feed: Option<FeedSpec>,
) -> Result<PlannerState, ScenarioError> {
    mode.validate()?;
    let horizon = Instant::from_ms(cfg.horizon_ms);
    let detector_cfg = mode.detector();
    let state = Arc::new(Mutex::new(PlannerState::default()));

    let mut graph = Graph::new();
    graph.add_operator(
        OperatorSpec::new("camera", Camera { period_ms: cfg.frame_period_ms, horizon, next: 0, visible })
            .output::<CameraFrame>("frames"),
    )?;
    let detector = match mode {
        ExecutionMode::Local { detector } => OperatorSpec::new(
            "detector",
            LocalDetector { runtime_ms: detector.local_runtime_ms, busy_until: Default::default(), cloud: None },
        ),
        ExecutionMode::Cloud { detector, latency } => OperatorSpec::new(
            "detector",
            CloudDetector { service: CloudService::new(&detector.name, detector.cloud_runtime_ms, latency.clone()) },
        ),
        ExecutionMode::Ours { detector, latency, deadline_ms } => OperatorSpec::new(
            "detector",
            LocalDetector {
                runtime_ms: detector.local_runtime_ms,
                busy_until: Default::default(),
                cloud: Some(CloudPlan {
                    service: CloudService::new(&detector.name, detector.cloud_runtime_ms, latency.clone()),
                    local_deadline_ms: deadline_ms.unwrap_or(detector.local_runtime_ms),
                    skipped_deadline_ms: cfg.end_to_end_budget_ms - cfg.pipeline_overhead_ms,
                }),
            },
        ),
    };
    graph.add_operator(detector.input::<CameraFrame>("frames").output::<Detection>("detections"))?;

    let mut planner = OperatorSpec::new(
        "planner",
        Planner {
            required: detector_cfg.consecutive_frames_required,
            overhead: Span::from_ms(cfg.pipeline_overhead_ms),
            streak: 0,
            state: Arc::clone(&state),
        },
    )
    .input::<Detection>("detections");
    if let Some(spec) = feed {
        graph.add_operator(OperatorSpec::new("feed", FeedSource { spec, horizon, seq: 0 }).output::<FeedReport>("feed"))?;
        planner = planner.input::<FeedReport>("feed");
    }
    graph.add_operator(planner)?;

    let log = graph.run(RunConfig::simulated(Until::Time(horizon)))?;
    if let Some(err) = log.events("error").next() {
        return Err(ScenarioError::Operator(format!("{}: {}", err.operator, err.detail)));
    }
    let mut state = state.lock().expect("planner lock");
    Ok(std::mem::take(&mut *state))
}
