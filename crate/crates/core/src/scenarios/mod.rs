//! Kinematic driving scenarios.
//!
//! * traffic jam: brake for stopped traffic once the detector has seen it
//!   on enough consecutive frames;
//! * red light: a crossing vehicle hidden by an occluder, optionally
//!   announced early by a shared location feed;
//! * jaywalk: a pedestrian steps out; a cached contingency plan shortens the
//!   response enough to swerve.
//!
//! The traffic-jam and red-light runs execute a camera → detector → planner
//! graph on the dataflow runtime; [`sweep_matrix`] runs the traffic jam over
//! a speed × response-time grid.

mod config;
mod detectors;
mod kinematics;
mod pipeline;
mod sweep;

use serde::{Deserialize, Serialize};

pub use config::{ExecutionMode, ModeKind, ModeSpec, ScenarioConfig, ScenarioKind, SimFile, SweepSpec};
pub use detectors::{default_detectors, find_detector, speedup_table, DetectorConfig, SpeedupRow};
pub use kinematics::{simulate_braking, stopping_distance, BrakeRun, Heading, KinematicState, STEP_MS};
pub use pipeline::{CameraFrame, Detection, FeedReport, Origin};
pub use sweep::{render_grid, sweep_matrix, write_matrix_csv, SweepCell, SweepMatrix, MATRIX_HEADER};

use crate::dataflow::DataflowError;
use crate::netsim::{LatencyModel, NetsimError};
use crate::time::Instant;
use pipeline::{run_perception, FeedSpec};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("{operation} needs a {expected} scenario")]
    WrongScenario { operation: &'static str, expected: &'static str },
    #[error("unknown detector {0:?}")]
    UnknownDetector(String),
    #[error("operator failed: {0}")]
    Operator(String),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error("config parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One result that reached the planner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub capture_ms: f64,
    pub detected: bool,
    pub delivered_ms: f64,
    /// `local`, `cloud`, `feed`, `brake` or `swerve`.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub collided: bool,
    /// Closest approach to the hazard; infinite when there is none.
    pub min_gap_m: f64,
    pub brake_instant_ms: Option<f64>,
    pub stop_instant_ms: Option<f64>,
    pub frames: Vec<FrameRecord>,
}

fn braking_outcome(cfg: &ScenarioConfig, speed: f64, gap: f64, brake_at: Option<Instant>, frames: Vec<FrameRecord>) -> Outcome {
    let brake_instant_ms = brake_at.map(Instant::as_ms);
    let run = simulate_braking(speed, cfg.decel_mps2, brake_instant_ms, gap, STEP_MS, cfg.horizon_ms);
    Outcome {
        collided: run.collided,
        min_gap_m: run.min_gap_m,
        brake_instant_ms,
        stop_instant_ms: run.stop_instant_ms,
        frames,
    }
}

pub fn run_traffic_jam(cfg: &ScenarioConfig, mode: &ExecutionMode) -> Result<Outcome, ScenarioError> {
    cfg.validate()?;
    let ScenarioKind::TrafficJam { gap_m, speed_mps } = cfg.scenario else {
        return Err(ScenarioError::WrongScenario { operation: "run_traffic_jam", expected: "traffic_jam" });
    };
    let range = mode.detector().detection_range_m;
    // the vehicle cruises until the brake command, so capture-time distance is linear
    let visible = Box::new(move |t: Instant| gap_m - speed_mps * t.as_ms() / 1e3 <= range);
    let planner = run_perception(cfg, mode, visible, None)?;
    Ok(braking_outcome(cfg, speed_mps, gap_m, planner.brake_at, planner.frames))
}

/// The crossing vehicle counts as an obstacle at the conflict point. With
/// `shared_feed` set, its reports arrive every `feed_period_ms` after
/// `feed_latency`.
pub fn run_red_light(
    cfg: &ScenarioConfig,
    mode: &ExecutionMode,
    feed_latency: &LatencyModel,
) -> Result<Outcome, ScenarioError> {
    cfg.validate()?;
    let ScenarioKind::RedLight { occlusion_lift_gap_m, shared_feed, speed_mps, approach_gap_m, feed_period_ms } =
        cfg.scenario
    else {
        return Err(ScenarioError::WrongScenario { operation: "run_red_light", expected: "red_light" });
    };
    let sight = occlusion_lift_gap_m.min(mode.detector().detection_range_m);
    let visible = Box::new(move |t: Instant| approach_gap_m - speed_mps * t.as_ms() / 1e3 <= sight);
    let feed = if shared_feed {
        feed_latency.validate()?;
        Some(FeedSpec { period_ms: feed_period_ms, latency: feed_latency.clone() })
    } else {
        None
    };
    let planner = run_perception(cfg, mode, visible, feed)?;
    Ok(braking_outcome(cfg, speed_mps, approach_gap_m, planner.brake_at, planner.frames))
}

/// Without `contingency` the local planner's brake plan is enacted after
/// `local_plan_ms`. With it, the cached swerve plan is enacted after
/// `cached_plan_ms`; the swerve succeeds if the pedestrian is still at least
/// `swerve_min_gap_m` away, otherwise the vehicle brakes.
pub fn run_jaywalk(cfg: &ScenarioConfig, contingency: bool) -> Result<Outcome, ScenarioError> {
    cfg.validate()?;
    let ScenarioKind::Jaywalk {
        pedestrian_gap_m,
        local_plan_ms,
        cached_plan_ms,
        speed_mps,
        swerve_min_gap_m,
        pedestrian_enters,
    } = cfg.scenario
    else {
        return Err(ScenarioError::WrongScenario { operation: "run_jaywalk", expected: "jaywalk" });
    };
    if !pedestrian_enters {
        return Ok(Outcome {
            collided: false,
            min_gap_m: f64::INFINITY,
            brake_instant_ms: None,
            stop_instant_ms: None,
            frames: Vec::new(),
        });
    }
    let response_ms = if contingency { cached_plan_ms } else { local_plan_ms };
    let mut state = KinematicState::cruising(speed_mps);
    let mut t = 0.0;
    while t < response_ms {
        let dt = STEP_MS.min(response_ms - t);
        state.step(dt / 1e3);
        t += dt;
    }
    let gap_at_plan = pedestrian_gap_m - state.position_m;
    let record = |source: &str| FrameRecord {
        frame: 0,
        capture_ms: 0.0,
        detected: true,
        delivered_ms: response_ms,
        source: source.to_owned(),
    };
    if contingency && gap_at_plan >= swerve_min_gap_m {
        return Ok(Outcome {
            collided: false,
            min_gap_m: gap_at_plan,
            brake_instant_ms: None,
            stop_instant_ms: None,
            frames: vec![record("swerve")],
        });
    }
    let run = simulate_braking(speed_mps, cfg.decel_mps2, Some(response_ms), pedestrian_gap_m, STEP_MS, cfg.horizon_ms);
    Ok(Outcome {
        collided: run.collided,
        min_gap_m: run.min_gap_m,
        brake_instant_ms: Some(response_ms),
        stop_instant_ms: run.stop_instant_ms,
        frames: vec![record("brake")],
    })
}
