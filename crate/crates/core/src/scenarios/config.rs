use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::netsim::LatencyModel;

use super::detectors::{default_detectors, find_detector, DetectorConfig};
use super::ScenarioError;

/// Scripted situation; each variant carries its own geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Stopped traffic `gap_m` ahead of an ego vehicle cruising at `speed_mps`.
    TrafficJam {
        #[serde(default = "defaults::jam_gap")]
        gap_m: f64,
        #[serde(default = "defaults::jam_speed")]
        speed_mps: f64,
    },
    /// A vehicle runs a red light behind an occluding truck. Ego can only see
    /// it within `occlusion_lift_gap_m` of the conflict point.
    RedLight {
        #[serde(default = "defaults::occlusion_lift_gap")]
        occlusion_lift_gap_m: f64,
        #[serde(default)]
        shared_feed: bool,
        #[serde(default = "defaults::red_light_speed")]
        speed_mps: f64,
        #[serde(default = "defaults::approach_gap")]
        approach_gap_m: f64,
        #[serde(default = "defaults::feed_period")]
        feed_period_ms: f64,
    },
    /// A pedestrian steps out `pedestrian_gap_m` ahead.
    Jaywalk {
        #[serde(default = "defaults::pedestrian_gap")]
        pedestrian_gap_m: f64,
        #[serde(default = "defaults::local_plan")]
        local_plan_ms: f64,
        #[serde(default = "defaults::cached_plan")]
        cached_plan_ms: f64,
        #[serde(default = "defaults::jaywalk_speed")]
        speed_mps: f64,
        #[serde(default = "defaults::swerve_min_gap")]
        swerve_min_gap_m: f64,
        #[serde(default = "defaults::yes")]
        pedestrian_enters: bool,
    },
}

impl ScenarioKind {
    pub fn traffic_jam(speed_mps: f64) -> Self {
        ScenarioKind::TrafficJam { gap_m: defaults::jam_gap(), speed_mps }
    }

    pub fn red_light(shared_feed: bool) -> Self {
        ScenarioKind::RedLight {
            occlusion_lift_gap_m: defaults::occlusion_lift_gap(),
            shared_feed,
            speed_mps: defaults::red_light_speed(),
            approach_gap_m: defaults::approach_gap(),
            feed_period_ms: defaults::feed_period(),
        }
    }

    pub fn jaywalk() -> Self {
        ScenarioKind::Jaywalk {
            pedestrian_gap_m: defaults::pedestrian_gap(),
            local_plan_ms: defaults::local_plan(),
            cached_plan_ms: defaults::cached_plan(),
            speed_mps: defaults::jaywalk_speed(),
            swerve_min_gap_m: defaults::swerve_min_gap(),
            pedestrian_enters: true,
        }
    }

    fn positive_fields(&self) -> Vec<(&'static str, f64)> {
        match self {
            ScenarioKind::TrafficJam { gap_m, .. } => vec![("gap_m", *gap_m)],
            ScenarioKind::RedLight { occlusion_lift_gap_m, approach_gap_m, feed_period_ms, .. } => vec![
                ("occlusion_lift_gap_m", *occlusion_lift_gap_m),
                ("approach_gap_m", *approach_gap_m),
                ("feed_period_ms", *feed_period_ms),
            ],
            ScenarioKind::Jaywalk { pedestrian_gap_m, local_plan_ms, cached_plan_ms, swerve_min_gap_m, .. } => vec![
                ("pedestrian_gap_m", *pedestrian_gap_m),
                ("local_plan_ms", *local_plan_ms),
                ("cached_plan_ms", *cached_plan_ms),
                ("swerve_min_gap_m", *swerve_min_gap_m),
            ],
        }
    }

    fn speed(&self) -> f64 {
        match self {
            ScenarioKind::TrafficJam { speed_mps, .. }
            | ScenarioKind::RedLight { speed_mps, .. }
            | ScenarioKind::Jaywalk { speed_mps, .. } => *speed_mps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "defaults::frame_period")]
    pub frame_period_ms: f64,
    #[serde(default = "defaults::decel")]
    pub decel_mps2: f64,
    /// Upper bound on camera-to-actuation time; bounds how long a frame the
    /// local detector skips may wait for the cloud.
    #[serde(default = "defaults::budget")]
    pub end_to_end_budget_ms: f64,
    /// Non-detection latency (sensing, planning, control) added to every
    /// result before it reaches the actuators.
    #[serde(default = "defaults::overhead")]
    pub pipeline_overhead_ms: f64,
    /// Simulated time after which a run stops.
    #[serde(default = "defaults::horizon")]
    pub horizon_ms: f64,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        ScenarioConfig {
            scenario,
            frame_period_ms: defaults::frame_period(),
            decel_mps2: defaults::decel(),
            end_to_end_budget_ms: defaults::budget(),
            pipeline_overhead_ms: defaults::overhead(),
            horizon_ms: defaults::horizon(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut fields = self.scenario.positive_fields();
        fields.extend([
            ("frame_period_ms", self.frame_period_ms),
            ("decel_mps2", self.decel_mps2),
            ("end_to_end_budget_ms", self.end_to_end_budget_ms),
            ("horizon_ms", self.horizon_ms),
        ]);
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScenarioError::InvalidConfig(format!("{name} must be > 0, got {value}")));
            }
        }
        let speed = self.scenario.speed();
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(ScenarioError::InvalidConfig(format!("speed_mps must be >= 0, got {speed}")));
        }
        if !(self.pipeline_overhead_ms >= 0.0) || self.pipeline_overhead_ms >= self.end_to_end_budget_ms {
            return Err(ScenarioError::InvalidConfig(format!(
                "pipeline_overhead_ms must be in [0, end_to_end_budget_ms), got {}",
                self.pipeline_overhead_ms
            )));
        }
        Ok(())
    }
}

/// How detection results are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "approach", rename_all = "snake_case")]
pub enum ExecutionMode {
    /// On-vehicle detector only, one frame at a time.
    Local { detector: DetectorConfig },
    /// Every frame sent to the cloud; results arrive after
    /// `cloud_runtime + rtt` with no local fallback.
    Cloud { detector: DetectorConfig, latency: LatencyModel },
    /// Local detector plus a speculative cloud request per frame.
    Ours {
        detector: DetectorConfig,
        latency: LatencyModel,
        /// Deadline for frames the local detector also processes; defaults
        /// to the local runtime.
        #[serde(default)]
        deadline_ms: Option<f64>,
    },
}

impl ExecutionMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            ExecutionMode::Local { .. } => ModeKind::Local,
            ExecutionMode::Cloud { .. } => ModeKind::Cloud,
            ExecutionMode::Ours { .. } => ModeKind::Ours,
        }
    }

    pub fn detector(&self) -> &DetectorConfig {
        match self {
            ExecutionMode::Local { detector }
            | ExecutionMode::Cloud { detector, .. }
            | ExecutionMode::Ours { detector, .. } => detector,
        }
    }

    /// Replaces the seed of a log-normal latency model.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let ExecutionMode::Cloud { latency, .. } | ExecutionMode::Ours { latency, .. } = &mut self {
            if let LatencyModel::LogNormal { seed, .. } = latency {
                *seed = new_seed;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.detector().validate()?;
        match self {
            ExecutionMode::Local { .. } => {}
            ExecutionMode::Cloud { latency, .. } => latency.validate()?,
            ExecutionMode::Ours { latency, deadline_ms, .. } => {
                latency.validate()?;
                if let Some(d) = deadline_ms {
                    if !(*d > 0.0 && d.is_finite()) {
                        return Err(ScenarioError::InvalidConfig(format!("deadline_ms must be > 0, got {d}")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Local,
    Cloud,
    Ours,
}

impl ModeKind {
    pub const ALL: [ModeKind; 3] = [ModeKind::Local, ModeKind::Cloud, ModeKind::Ours];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeKind::Local => "local",
            ModeKind::Cloud => "cloud",
            ModeKind::Ours => "ours",
        }
    }

    /// Builds the mode for one sweep cell, where the whole cloud response
    /// (runtime plus network) takes `response_time_ms`.
    pub fn with_response_time(self, detector: &DetectorConfig, response_time_ms: f64) -> Result<ExecutionMode, ScenarioError> {
        let detector = detector.clone();
        let rtt_ms = response_time_ms - detector.cloud_runtime_ms;
        if self != ModeKind::Local && rtt_ms < 0.0 {
            return Err(ScenarioError::InvalidConfig(format!(
                "response time {response_time_ms} ms is below the cloud runtime of {}",
                detector.name
            )));
        }
        let latency = LatencyModel::constant(rtt_ms);
        Ok(match self {
            ModeKind::Local => ExecutionMode::Local { detector },
            ModeKind::Cloud => ExecutionMode::Cloud { detector, latency },
            ModeKind::Ours => ExecutionMode::Ours { detector, latency, deadline_ms: None },
        })
    }
}

/// Mode as written in a config file, naming a detector from the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "approach", rename_all = "snake_case")]
pub enum ModeSpec {
    Local { detector: String },
    Cloud { detector: String, latency: LatencyModel },
    Ours {
        detector: String,
        latency: LatencyModel,
        #[serde(default)]
        deadline_ms: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub speeds_mps: Vec<f64>,
    pub response_times_s: Vec<f64>,
    #[serde(default = "defaults::all_modes")]
    pub modes: Vec<ModeKind>,
    pub detector: String,
}

/// Everything `spx sim` reads from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimFile {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorConfig>,
    #[serde(default)]
    pub mode: Option<ModeSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Shared location feed for the red-light scenario; 68 ms constant if absent.
    #[serde(default)]
    pub feed_latency: Option<LatencyModel>,
    /// Jaywalk only: enact the cached plan. Defaults to true for the `ours` mode.
    #[serde(default)]
    pub contingency: Option<bool>,
}

impl SimFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: SimFile = serde_json::from_str(text)?;
        file.scenario.validate()?;
        for d in &file.detectors {
            d.validate()?;
        }
        Ok(file)
    }

    /// Sets the seed of every log-normal model in the file.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let models = [
            match &mut self.mode {
                Some(ModeSpec::Cloud { latency, .. } | ModeSpec::Ours { latency, .. }) => Some(latency),
                _ => None,
            },
            self.feed_latency.as_mut(),
        ];
        for model in models.into_iter().flatten() {
            if let LatencyModel::LogNormal { seed: s, .. } = model {
                *s = seed;
            }
        }
        self
    }

    pub fn feed_latency(&self) -> LatencyModel {
        self.feed_latency.clone().unwrap_or(LatencyModel::constant(68.0))
    }

    pub fn contingency(&self) -> bool {
        self.contingency.unwrap_or(matches!(self.mode, Some(ModeSpec::Ours { .. })))
    }

    pub fn resolve_mode(&self) -> Result<ExecutionMode, ScenarioError> {
        let spec = self.mode.as_ref().ok_or_else(|| ScenarioError::InvalidConfig("config has no `mode`".into()))?;
        let mode = match spec {
            ModeSpec::Local { detector } => {
                ExecutionMode::Local { detector: find_detector(&self.detectors, detector)?.clone() }
            }
            ModeSpec::Cloud { detector, latency } => ExecutionMode::Cloud {
                detector: find_detector(&self.detectors, detector)?.clone(),
                latency: latency.clone(),
            },
            ModeSpec::Ours { detector, latency, deadline_ms } => ExecutionMode::Ours {
                detector: find_detector(&self.detectors, detector)?.clone(),
                latency: latency.clone(),
                deadline_ms: *deadline_ms,
            },
        };
        mode.validate()?;
        Ok(mode)
    }
}

pub(crate) mod defaults {
    use super::ModeKind;

    // Traffic-jam gap: with the 200 ms overhead and 7.5 m/s² braking, Local
    // (DETR-ResNet-50) brakes 1168.3 ms after the first frame, which stops
    // within 57.5 m at 20 m/s but not at 22 m/s.
    pub fn jam_gap() -> f64 {
        57.5
    }
    pub fn jam_speed() -> f64 {
        20.0
    }
    pub fn occlusion_lift_gap() -> f64 {
        12.0
    }
    pub fn red_light_speed() -> f64 {
        15.0
    }
    pub fn approach_gap() -> f64 {
        40.0
    }
    pub fn feed_period() -> f64 {
        100.0
    }
    pub fn pedestrian_gap() -> f64 {
        10.0
    }
    pub fn local_plan() -> f64 {
        500.0
    }
    pub fn cached_plan() -> f64 {
        400.0
    }
    pub fn jaywalk_speed() -> f64 {
        18.0
    }
    pub fn swerve_min_gap() -> f64 {
        2.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn frame_period() -> f64 {
        33.33
    }
    pub fn decel() -> f64 {
        7.5
    }
    pub fn budget() -> f64 {
        3200.0
    }
    pub fn overhead() -> f64 {
        200.0
    }
    pub fn horizon() -> f64 {
        10_000.0
    }
    pub fn all_modes() -> Vec<ModeKind> {
        ModeKind::ALL.to_vec()
    }
}
