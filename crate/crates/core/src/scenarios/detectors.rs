use serde::{Deserialize, Serialize};

use super::ScenarioError;

fn default_range() -> f64 {
    60.0
}

fn default_frames() -> u32 {
    3
}

/// An object detector with its on-vehicle and cloud runtimes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub name: String,
    pub local_runtime_ms: f64,
    pub cloud_runtime_ms: f64,
    #[serde(default = "default_range")]
    pub detection_range_m: f64,
    #[serde(default = "default_frames")]
    pub consecutive_frames_required: u32,
}

impl DetectorConfig {
    pub fn new(name: &str, local_runtime_ms: f64, cloud_runtime_ms: f64) -> Self {
        DetectorConfig {
            name: name.to_owned(),
            local_runtime_ms,
            cloud_runtime_ms,
            detection_range_m: default_range(),
            consecutive_frames_required: default_frames(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.local_runtime_ms > 0.0 && self.cloud_runtime_ms > 0.0) {
            return Err(ScenarioError::InvalidConfig(format!("{}: runtimes must be > 0", self.name)));
        }
        if !(self.detection_range_m > 0.0) || self.consecutive_frames_required == 0 {
            return Err(ScenarioError::InvalidConfig(format!(
                "{}: detection range and frame count must be > 0",
                self.name
            )));
        }
        Ok(())
    }

    pub fn speedup(&self) -> f64 {
        self.local_runtime_ms / self.cloud_runtime_ms
    }
}

/// Orin (on-vehicle) vs A100 (cloud) runtimes of six detectors.
pub fn default_detectors() -> Vec<DetectorConfig> {
    vec![
        DetectorConfig::new("DETR-ResNet-50", 301.7, 102.2),
        DetectorConfig::new("DETR-ResNet-101", 407.7, 118.2),
        DetectorConfig::new("DETR-ResNet-101-DC", 859.2, 146.6),
        DetectorConfig::new("DINO-SWIN-Tiny", 722.1, 90.1),
        DetectorConfig::new("DINO-SWIN-Small", 903.5, 107.1),
        DetectorConfig::new("DINO-SWIN-Large", 1529.9, 180.8),
    ]
}

pub fn find_detector<'a>(detectors: &'a [DetectorConfig], name: &str) -> Result<&'a DetectorConfig, ScenarioError> {
    detectors
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| ScenarioError::UnknownDetector(name.to_owned()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub name: String,
    pub local_ms: f64,
    pub cloud_ms: f64,
    /// Rounded to two decimals.
    pub speedup: f64,
}

pub fn speedup_table(detectors: &[DetectorConfig]) -> Vec<SpeedupRow> {
    detectors
        .iter()
        .map(|d| SpeedupRow {
            name: d.name.clone(),
            local_ms: d.local_runtime_ms,
            cloud_ms: d.cloud_runtime_ms,
            speedup: (d.speedup() * 100.0).round() / 100.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_runtimes_give_unit_speedup() {
        let rows = speedup_table(&[DetectorConfig::new("same", 100.0, 100.0)]);
        assert_eq!(rows[0].speedup, 1.0);
    }

    #[test]
    fn lookup_and_validation() {
        let table = default_detectors();
        assert_eq!(find_detector(&table, "DETR-ResNet-50").unwrap().local_runtime_ms, 301.7);
        assert!(matches!(find_detector(&table, "YOLO"), Err(ScenarioError::UnknownDetector(_))));
        assert!(DetectorConfig::new("bad", 0.0, 1.0).validate().is_err());
    }
}
