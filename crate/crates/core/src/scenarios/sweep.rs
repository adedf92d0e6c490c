use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModeKind, ScenarioConfig, ScenarioKind};
use super::detectors::DetectorConfig;
use super::{run_traffic_jam, Outcome, ScenarioError};

pub const MATRIX_HEADER: [&str; 6] = ["speed_mps", "response_time_s", "mode", "collided", "min_gap_m", "brake_instant_ms"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub speed_mps: f64,
    pub response_time_s: f64,
    pub mode: ModeKind,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMatrix {
    pub speeds_mps: Vec<f64>,
    pub response_times_s: Vec<f64>,
    pub modes: Vec<ModeKind>,
    /// Speed-major, then mode, then response time.
    pub cells: Vec<SweepCell>,
}

impl SweepMatrix {
    pub fn cell(&self, speed_mps: f64, mode: ModeKind, response_time_s: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.speed_mps == speed_mps && c.mode == mode && c.response_time_s == response_time_s)
    }
}

/// Runs the traffic jam for every (speed, mode, response time) combination.
/// The scenario geometry other than speed comes from `cfg`.
pub fn sweep_matrix(
    speeds_mps: &[f64],
    response_times_s: &[f64],
    modes: &[ModeKind],
    cfg: &ScenarioConfig,
    detector: &DetectorConfig,
) -> Result<SweepMatrix, ScenarioError> {
    if speeds_mps.is_empty() || response_times_s.is_empty() || modes.is_empty() {
        return Err(ScenarioError::InvalidConfig("sweep axes must be nonempty".into()));
    }
    let ScenarioKind::TrafficJam { gap_m, .. } = cfg.scenario else {
        return Err(ScenarioError::WrongScenario { operation: "sweep_matrix", expected: "traffic_jam" });
    };
    let mut jobs = Vec::new();
    for &speed in speeds_mps {
        for &mode in modes {
            for &response in response_times_s {
                jobs.push((speed, mode, response));
            }
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(speed_mps, mode, response_time_s)| {
            let cell_cfg = ScenarioConfig { scenario: ScenarioKind::TrafficJam { gap_m, speed_mps }, ..cfg.clone() };
            let exec = mode.with_response_time(detector, response_time_s * 1e3)?;
            let outcome = run_traffic_jam(&cell_cfg, &exec)?;
            Ok(SweepCell { speed_mps, response_time_s, mode, outcome })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(SweepMatrix {
        speeds_mps: speeds_mps.to_vec(),
        response_times_s: response_times_s.to_vec(),
        modes: modes.to_vec(),
        cells,
    })
}

pub fn write_matrix_csv<W: Write>(matrix: &SweepMatrix, writer: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MATRIX_HEADER)?;
    for c in &matrix.cells {
        w.write_record([
            c.speed_mps.to_string(),
            c.response_time_s.to_string(),
            c.mode.as_str().to_owned(),
            c.outcome.collided.to_string(),
            format!("{:.3}", c.outcome.min_gap_m),
            c.outcome.brake_instant_ms.map(|b| format!("{b:.3}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned grid: one row per (speed, mode), one column per response time.
/// `ok` cells avoid a collision, `HIT` cells collide.
pub fn render_grid(matrix: &SweepMatrix, color: bool) -> String {
    const GREEN: &str = "\x1b[42;30m";
    const RED: &str = "\x1b[41;97m";
    const RESET: &str = "\x1b[0m";
    let mut out = String::new();
    let _ = write!(out, "{:>6} {:<6}", "speed", "mode");
    for r in &matrix.response_times_s {
        let _ = write!(out, " {:>6}", format!("{r}s"));
    }
    out.push('\n');
    for &speed in &matrix.speeds_mps {
        for &mode in &matrix.modes {
            let _ = write!(out, "{:>6} {:<6}", speed, mode.as_str());
            for &r in &matrix.response_times_s {
                let collided = matrix.cell(speed, mode, r).map(|c| c.outcome.collided);
                let (label, paint) = match collided {
                    Some(false) => ("ok", GREEN),
                    Some(true) => ("HIT", RED),
                    None => ("-", ""),
                };
                if color && !paint.is_empty() {
                    let _ = write!(out, " {paint}{label:^6}{RESET}");
                } else {
                    let _ = write!(out, " {label:^6}");
                }
            }
            out.push('\n');
        }
    }
    out
}
