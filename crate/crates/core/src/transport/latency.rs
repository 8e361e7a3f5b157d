//! End-to-end latency statistics: receiver arrival time minus the
//! offset-corrected origin timestamp.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub max_ms: f64,
    /// Samples whose corrected latency came out negative and were clamped to 0.
    pub clamped: u64,
}

impl fmt::Display for LatencyStats {
    /// Renders as `mean ± std, max M` with whole milliseconds.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.0} ± {:.0}, max {:.0}", self.mean_ms, self.std_ms, self.max_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatencyError {
    #[error("no latency samples")]
    Empty,
}

/// Streaming accumulator used by live sessions.
#[derive(Debug, Clone, Default)]
pub struct LatencyAccumulator {
    stats: RunningStats,
    clamped: u64,
}

impl LatencyAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t_origin_corrected: f64, t_received: f64) {
        let mut delay = t_received - t_origin_corrected;
        if delay < 0.0 {
            self.clamped += 1;
            delay = 0.0;
        }
        self.stats.push(delay);
    }

    pub fn stats(&self) -> Option<LatencyStats> {
        Some(LatencyStats {
            count: self.stats.count(),
            mean_ms: self.stats.mean()?,
            std_ms: self.stats.std()?,
            max_ms: self.stats.max()?,
            clamped: self.clamped,
        })
    }
}

pub fn latency_stats(pairs: &[(f64, f64)]) -> Result<LatencyStats, LatencyError> {
    let mut acc = LatencyAccumulator::new();
    for &(origin, received) in pairs {
        acc.record(origin, received);
    }
    acc.stats().ok_or(LatencyError::Empty)
}
