//! CSV artifacts and the run manifest.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! failed run never leaves a truncated file behind. Floats are written in
//! Rust's shortest round-trip form, which does not depend on locale.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::engine::{Mode, SimReport};
use crate::error::{Error, Result};
use crate::metrics::SchedulerStats;

pub const PER_UE_HEADER: [&str; 5] = ["ue_id", "capability", "position_m", "window_index", "rate_bps"];
pub const STATS_HEADER: [&str; 7] = [
    "mode",
    "seed",
    "users_below_threshold",
    "system_throughput_bps",
    "max_throughput_bps",
    "min_throughput_bps",
    "std_dev_bps",
];

pub fn per_ue_file_name(mode: Mode, seed: u64) -> String {
    format!("per_ue_{}_{seed}.csv", mode.as_str())
}

pub fn stats_file_name(mode: Mode, seed: u64) -> String {
    format!("stats_{}_{seed}.csv", mode.as_str())
}

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Window-by-window rate of every user, one row per (user, window).
pub fn per_ue_csv(report: &SimReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PER_UE_HEADER).map_err(csv_err)?;
    for ue in &report.ues {
        for (k, rate) in ue.window_rates.iter().enumerate() {
            w.write_record([
                ue.id.to_string(),
                ue.capability.as_str().to_string(),
                ue.position.to_string(),
                k.to_string(),
                rate.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn stats_csv(report: &SimReport) -> Result<Vec<u8>> {
    let s = &report.stats;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STATS_HEADER).map_err(csv_err)?;
    w.write_record([
        report.mode.as_str().to_string(),
        report.seed.to_string(),
        s.users_below_threshold.to_string(),
        s.system_throughput.to_string(),
        s.max_throughput.to_string(),
        s.min_throughput.to_string(),
        s.std_dev.to_string(),
    ])
    .map_err(csv_err)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Mean of each statistic over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStats {
    pub users_below_threshold: f64,
    pub system_throughput: f64,
    pub max_throughput: f64,
    pub min_throughput: f64,
    pub std_dev: f64,
}

impl MeanStats {
    pub fn of(stats: &[SchedulerStats]) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::EmptyStats);
        }
        let n = stats.len() as f64;
        let mean = |f: fn(&SchedulerStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            users_below_threshold: mean(|s| s.users_below_threshold as f64),
            system_throughput: mean(|s| s.system_throughput),
            max_throughput: mean(|s| s.max_throughput),
            min_throughput: mean(|s| s.min_throughput),
            std_dev: mean(|s| s.std_dev),
        })
    }

    fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("users_below_threshold", self.users_below_threshold),
            ("system_throughput_bps", self.system_throughput),
            ("max_throughput_bps", self.max_throughput),
            ("min_throughput_bps", self.min_throughput),
            ("std_dev_bps", self.std_dev),
        ]
    }
}

fn ratio(a: f64, b: f64) -> String {
    if b == 0.0 {
        String::new()
    } else {
        (a / b).to_string()
    }
}

/// Table-shaped comparison: one row per statistic, one column per mode,
/// plus the joint/lte and joint/wifi ratios. A ratio over zero is left
/// empty.
pub fn comparison_csv(lte: &MeanStats, wifi: &MeanStats, joint: &MeanStats) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "lte", "wifi", "joint", "joint_over_lte", "joint_over_wifi"])
        .map_err(csv_err)?;
    for ((name, l), ((_, wi), (_, j))) in lte.rows().into_iter().zip(wifi.rows().into_iter().zip(joint.rows())) {
        w.write_record([name.to_string(), l.to_string(), wi.to_string(), j.to_string(), ratio(j, l), ratio(j, wi)])
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Hex SHA-256 of the canonical TOML form of `config`, seed excluded so a
/// sweep shares one digest.
pub fn config_digest(config: &SimConfig) -> String {
    let canonical = SimConfig { seed: 0, ..config.clone() }.to_toml();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    /// First seed of the sweep.
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub modes: Vec<String>,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    /// Resolved configuration, seed as given on the command line.
    pub config: SimConfig,
}

impl RunManifest {
    pub fn new(config: &SimConfig, seeds: &[u64], modes: &[Mode], output_dir: &Path) -> Self {
        let mut files = Vec::new();
        for &seed in seeds {
            for &mode in modes {
                files.push(per_ue_file_name(mode, seed));
                files.push(stats_file_name(mode, seed));
            }
        }
        if modes.len() == Mode::ALL.len() {
            files.push(COMPARISON_FILE.to_string());
        }
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config_digest(config),
            seed: seeds.first().copied().unwrap_or(config.seed),
            seeds: seeds.to_vec(),
            modes: modes.iter().map(|m| m.as_str().to_string()).collect(),
            output_dir: output_dir.to_path_buf(),
            files,
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in `dir`.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
