use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

/// Crypto wall time is charged to the virtual clock in steps of this size.
pub const COST_QUANTUM_US: u64 = 10;

pub const MIN_LATENCY_SAMPLES: usize = 100;

/// Measured duration rounded up to the cost quantum, in virtual µs.
pub fn quantize(measured: Duration) -> u64 {
    let us = measured.as_nanos().div_ceil(1000) as u64;
    us.div_ceil(COST_QUANTUM_US) * COST_QUANTUM_US
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("only {have} samples, need at least {need}")]
pub struct InsufficientSamples {
    pub have: usize,
    pub need: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub mean_s: f64,
    pub stdev_s: f64,
    pub count: usize,
}

/// Duration samples in seconds.
#[derive(Clone, Debug, Default)]
pub struct LatencyStats {
    samples: Vec<f64>,
}

impl LatencyStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_s(&mut self, s: f64) {
        self.samples.push(s);
    }

    pub fn push_us(&mut self, us: u64) {
        self.samples.push(us as f64 / 1e6);
    }

    pub fn push_duration(&mut self, d: Duration) {
        self.samples.push(d.as_secs_f64());
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Mean and sample standard deviation over whatever was collected.
    pub fn summary(&self) -> LatencySummary {
        let count = self.samples.len();
        if count == 0 {
            return LatencySummary::default();
        }
        let mean = self.samples.iter().sum::<f64>() / count as f64;
        let stdev = if count > 1 {
            let ss: f64 = self.samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        LatencySummary {
            mean_s: mean,
            stdev_s: stdev,
            count,
        }
    }

    /// Like [`summary`](Self::summary) but refuses small samples.
    pub fn measure(&self) -> Result<LatencySummary, InsufficientSamples> {
        if self.samples.len() < MIN_LATENCY_SAMPLES {
            return Err(InsufficientSamples {
                have: self.samples.len(),
                need: MIN_LATENCY_SAMPLES,
            });
        }
        Ok(self.summary())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_up() {
        assert_eq!(quantize(Duration::ZERO), 0);
        assert_eq!(quantize(Duration::from_nanos(1)), 10);
        assert_eq!(quantize(Duration::from_micros(10)), 10);
        assert_eq!(quantize(Duration::from_nanos(10_001)), 20);
        assert_eq!(quantize(Duration::from_micros(342)), 350);
    }

    #[test]
    fn summary_matches_hand_computation() {
        let mut s = LatencyStats::new();
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.push_s(x);
        }
        let m = s.summary();
        assert_eq!(m.mean_s, 2.5);
        assert!((m.stdev_s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.measure(), Err(InsufficientSamples { have: 4, need: 100 }));
        for _ in 0..96 {
            s.push_us(0);
        }
        assert_eq!(s.measure().unwrap().count, 100);
    }
}
