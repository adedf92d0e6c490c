use serde::{Deserialize, Serialize};

/// Integration step used by every scenario.
pub const STEP_MS: f64 = 1.0;

/// Distance covered while reacting for `reaction_ms` and then braking to a stop.
pub fn stopping_distance(speed_mps: f64, decel_mps2: f64, reaction_ms: f64) -> f64 {
    assert!(decel_mps2 > 0.0, "deceleration must be positive");
    speed_mps * reaction_ms / 1e3 + speed_mps * speed_mps / (2.0 * decel_mps2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    Lane,
    Swerve,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub position_m: f64,
    pub speed_mps: f64,
    /// Zero until a brake command.
    pub decel_mps2: f64,
    pub heading: Heading,
}

impl KinematicState {
    pub fn cruising(speed_mps: f64) -> Self {
        KinematicState { position_m: 0.0, speed_mps, decel_mps2: 0.0, heading: Heading::Lane }
    }

    /// Advances by `dt_s` under constant deceleration, stopping at zero speed.
    pub fn step(&mut self, dt_s: f64) {
        let v = self.speed_mps;
        let a = self.decel_mps2;
        if a > 0.0 && v <= a * dt_s {
            self.position_m += v * v / (2.0 * a);
            self.speed_mps = 0.0;
        } else {
            self.position_m += v * dt_s - 0.5 * a * dt_s * dt_s;
            self.speed_mps = v - a * dt_s;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrakeRun {
    /// Travel from the start of the run until standstill (or the horizon).
    pub travel_m: f64,
    /// `obstacle_gap - travel`; negative values are overshoot past the obstacle.
    pub min_gap_m: f64,
    pub stop_instant_ms: Option<f64>,
    pub collided: bool,
}

/// Drives at constant speed until `brake_at_ms`, then brakes at `decel_mps2`,
/// in steps of `dt_ms`. Without a brake command the run ends at `horizon_ms`.
pub fn simulate_braking(
    speed_mps: f64,
    decel_mps2: f64,
    brake_at_ms: Option<f64>,
    obstacle_gap_m: f64,
    dt_ms: f64,
    horizon_ms: f64,
) -> BrakeRun {
    let mut state = KinematicState::cruising(speed_mps);
    let mut t_ms = 0.0;
    let cruise_until = brake_at_ms.unwrap_or(horizon_ms);
    while t_ms < cruise_until && state.speed_mps > 0.0 {
        let dt = dt_ms.min(cruise_until - t_ms);
        state.step(dt / 1e3);
        t_ms += dt;
    }
    let mut stop_instant_ms = None;
    if brake_at_ms.is_some() {
        state.decel_mps2 = decel_mps2;
        while state.speed_mps > 0.0 {
            let before = state.speed_mps;
            state.step(dt_ms / 1e3);
            if state.speed_mps == 0.0 {
                t_ms += before / decel_mps2 * 1e3;
            } else {
                t_ms += dt_ms;
            }
        }
        stop_instant_ms = Some(t_ms);
    } else if speed_mps == 0.0 {
        stop_instant_ms = Some(0.0);
    }
    let min_gap_m = obstacle_gap_m - state.position_m;
    BrakeRun { travel_m: state.position_m, min_gap_m, stop_instant_ms, collided: min_gap_m <= 0.0 }
}
