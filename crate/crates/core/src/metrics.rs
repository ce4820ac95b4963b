//! Per-run summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Summary of long-run per-user throughput. All rates in bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerStats {
    pub users_below_threshold: u32,
    pub system_throughput: f64,
    pub max_throughput: f64,
    pub min_throughput: f64,
    /// Population standard deviation (divides by the number of users).
    pub std_dev: f64,
}

/// Statistics over one long-run rate per user. A rate equal to `r_min`
/// does not count as below threshold.
pub fn compute_stats(rates: &[f64], r_min: f64) -> Result<SchedulerStats> {
    if rates.is_empty() {
        return Err(Error::EmptyStats);
    }
    let n = rates.len() as f64;
    let sum: f64 = rates.iter().sum();
    let mean = sum / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(SchedulerStats {
        users_below_threshold: rates.iter().filter(|&&r| r < r_min).count() as u32,
        system_throughput: sum,
        max_throughput: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_throughput: rates.iter().copied().fold(f64::INFINITY, f64::min),
        std_dev: var.sqrt(),
    })
}
