use serde::{Deserialize, Serialize};

use super::latency::LatencyModel;
use super::NetsimError;

/// Uplink throughput. `bytes_per_ms = None` means serialization is free.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BandwidthModel {
    #[serde(default)]
    pub bytes_per_ms: Option<f64>,
}

impl BandwidthModel {
    pub fn unlimited() -> Self {
        BandwidthModel { bytes_per_ms: None }
    }

    pub fn bytes_per_ms(rate: f64) -> Result<Self, NetsimError> {
        if !(rate > 0.0) {
            return Err(NetsimError::InvalidModel(format!("bandwidth must be > 0 bytes/ms, got {rate}")));
        }
        Ok(BandwidthModel { bytes_per_ms: Some(rate) })
    }

    pub fn serialization_delay_ms(&self, payload_bytes: usize) -> f64 {
        match self.bytes_per_ms {
            Some(rate) if rate > 0.0 => payload_bytes as f64 / rate,
            _ => 0.0,
        }
    }
}

/// A remote model endpoint: fixed compute time plus network round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudService {
    pub name: String,
    pub runtime_ms: f64,
    pub latency: LatencyModel,
}

impl CloudService {
    pub fn new(name: impl Into<String>, runtime_ms: f64, latency: LatencyModel) -> Self {
        CloudService { name: name.into(), runtime_ms, latency }
    }

    /// Time from dispatch until the response is back, excluding uplink serialization.
    pub fn response_delay_ms(&self, draw: u64) -> Result<f64, NetsimError> {
        Ok(self.runtime_ms + self.latency.sample_rtt(draw)?)
    }
}

/// `payload_bytes / bandwidth + runtime + rtt`.
pub fn request_response_time(
    service: &CloudService,
    payload_bytes: usize,
    bandwidth: &BandwidthModel,
    draw: u64,
) -> Result<f64, NetsimError> {
    Ok(bandwidth.serialization_delay_ms(payload_bytes) + service.response_delay_ms(draw)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composes_runtime_and_rtt() {
        let bw = BandwidthModel::unlimited();
        let detr101 = CloudService::new("DETR-ResNet-101", 118.2, LatencyModel::constant(68.0));
        assert!((request_response_time(&detr101, 33_300, &bw, 0).unwrap() - 186.2).abs() < 1e-9);

        let bare = CloudService::new("echo", 0.0, LatencyModel::constant(68.0));
        assert_eq!(request_response_time(&bare, 0, &bw, 0).unwrap(), 68.0);

        let dino = CloudService::new("DINO-SWIN-Large", 180.8, LatencyModel::constant(68.0));
        assert!((request_response_time(&dino, 0, &bw, 0).unwrap() - 248.8).abs() < 1e-9);
    }

    #[test]
    fn serialization_delay_adds() {
        let bw = BandwidthModel::bytes_per_ms(1000.0).unwrap();
        let svc = CloudService::new("x", 10.0, LatencyModel::constant(5.0));
        assert!((request_response_time(&svc, 33_300, &bw, 0).unwrap() - 48.3).abs() < 1e-9);
        assert!(BandwidthModel::bytes_per_ms(0.0).is_err());
    }
}
