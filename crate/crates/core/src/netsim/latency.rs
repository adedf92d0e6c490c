//! Round-trip latency sources and the lognormal tail fit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::trace::LatencyTrace;
use super::NetsimError;

/// 90th-percentile quantile of the standard normal distribution.
pub const Z_P90: f64 = 1.28155;

/// Where simulated round-trip times come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    Constant { rtt_ms: f64 },
    TraceReplay { trace: LatencyTrace, wrap: bool },
    LogNormal { mu: f64, sigma: f64, seed: u64 },
}

impl LatencyModel {
    pub fn constant(rtt_ms: f64) -> Self {
        LatencyModel::Constant { rtt_ms }
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        match self {
            LatencyModel::Constant { rtt_ms } if !(*rtt_ms >= 0.0) => {
                Err(NetsimError::InvalidModel(format!("constant rtt must be >= 0, got {rtt_ms}")))
            }
            LatencyModel::TraceReplay { trace, .. } if trace.is_empty() => {
                Err(NetsimError::EmptyTrace)
            }
            LatencyModel::LogNormal { sigma, mu, .. } if !(*sigma > 0.0) || !mu.is_finite() => {
                Err(NetsimError::InvalidModel(format!("lognormal needs finite mu and sigma > 0, got ({mu}, {sigma})")))
            }
            _ => Ok(()),
        }
    }

    /// Draws the `draw_index`-th round-trip time.
    ///
    /// Every variant is a pure function of `(model, draw_index)`, so the same
    /// index always yields the same value regardless of call order.
    pub fn sample_rtt(&self, draw_index: u64) -> Result<f64, NetsimError> {
        match self {
            LatencyModel::Constant { rtt_ms } => Ok(*rtt_ms),
            LatencyModel::TraceReplay { trace, wrap } => {
                let samples = trace.samples();
                if samples.is_empty() {
                    return Err(NetsimError::EmptyTrace);
                }
                let len = samples.len() as u64;
                let idx = if *wrap {
                    draw_index % len
                } else if draw_index < len {
                    draw_index
                } else {
                    return Err(NetsimError::TraceExhausted { index: draw_index, len: samples.len() });
                };
                Ok(samples[idx as usize].rtt_ms)
            }
            LatencyModel::LogNormal { mu, sigma, seed } => {
                let z = standard_normal_draw(*seed, draw_index);
                Ok((mu + sigma * z).exp())
            }
        }
    }

    /// Analytic quantile for the parametric variants; `None` for trace replay.
    pub fn analytic_quantile(&self, q: f64) -> Option<f64> {
        match self {
            LatencyModel::Constant { rtt_ms } => Some(*rtt_ms),
            LatencyModel::LogNormal { mu, sigma, .. } => Some(lognormal_quantile(*mu, *sigma, q)),
            LatencyModel::TraceReplay { .. } => None,
        }
    }
}

/// One standard-normal variate per `(seed, index)`; each index gets its own ChaCha stream.
fn standard_normal_draw(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    StandardNormal.sample(&mut rng)
}

/// Parameters of a lognormal anchored at a median and a 90th percentile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalFit {
    pub fn quantile(&self, q: f64) -> f64 {
        lognormal_quantile(self.mu, self.sigma, q)
    }

    pub fn into_model(self, seed: u64) -> LatencyModel {
        LatencyModel::LogNormal { mu: self.mu, sigma: self.sigma, seed }
    }
}

/// `mu = ln(median)`, `sigma = ln(p90 / median) / z_0.9`.
pub fn fit_lognormal(median_ms: f64, p90_ms: f64) -> Result<LogNormalFit, NetsimError> {
    if !(median_ms > 0.0) || !median_ms.is_finite() || !p90_ms.is_finite() {
        return Err(NetsimError::InvalidFit(format!("median must be positive and finite, got {median_ms}")));
    }
    if !(p90_ms > median_ms) {
        return Err(NetsimError::InvalidFit(format!(
            "p90 ({p90_ms}) must exceed the median ({median_ms})"
        )));
    }
    Ok(LogNormalFit {
        mu: median_ms.ln(),
        sigma: (p90_ms / median_ms).ln() / Z_P90,
    })
}

/// Quantile `q` (a fraction in (0, 1)) of the lognormal with log-mean `mu` and log-sd `sigma`.
pub fn lognormal_quantile(mu: f64, sigma: f64, q: f64) -> f64 {
    let z = if (q - 0.9).abs() < 1e-12 {
        Z_P90
    } else if (q - 0.5).abs() < 1e-12 {
        0.0
    } else {
        Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(q)
    };
    (mu + sigma * z).exp()
}
