use thiserror::Error;

use crate::rng::DeterministicRng;

#[derive(Debug, Error, PartialEq)]
#[error("invalid latency spec {0:?} (expected constant:ms | exponential:mean | lognormal:mu,sigma)")]
pub struct LatencyParseError(pub String);

/// Latency distribution for simulated environment interactions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencyModel {
    Constant { ms: f64 },
    Exponential { mean_ms: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl LatencyModel {
    /// Parse a compact spec like `lognormal:3.0,1.2`.
    pub fn parse(spec: &str) -> Result<Self, LatencyParseError> {
        let err = || LatencyParseError(spec.to_string());
        let (family, args) = spec.split_once(':').ok_or_else(err)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err())?;
        match (family, nums.as_slice()) {
            ("constant", [ms]) if *ms >= 0.0 => Ok(Self::Constant { ms: *ms }),
            ("exponential", [mean]) if *mean > 0.0 => Ok(Self::Exponential { mean_ms: *mean }),
            ("lognormal", [mu, sigma]) if *sigma >= 0.0 => Ok(Self::Lognormal {
                mu: *mu,
                sigma: *sigma,
            }),
            _ => Err(err()),
        }
    }

    /// True for distributions with heavy upper tails at the configured
    /// parameters (straggler-prone workloads).
    pub fn heavy_tail(&self) -> bool {
        match self {
            Self::Constant { .. } => false,
            Self::Exponential { .. } => true,
            Self::Lognormal { sigma, .. } => *sigma > 0.5,
        }
    }

    /// Sample one latency; always strictly positive.
    pub fn sample(&self, rng: &mut DeterministicRng) -> f64 {
        let raw = match self {
            Self::Constant { ms } => *ms,
            Self::Exponential { mean_ms } => rng.exponential(*mean_ms),
            Self::Lognormal { mu, sigma } => rng.lognormal(*mu, *sigma),
        };
        raw.max(f64::MIN_POSITIVE)
    }

    /// Sample rounded up to whole milliseconds.
    pub fn sample_ms(&self, rng: &mut DeterministicRng) -> u64 {
        self.sample(rng).ceil() as u64
    }
}
