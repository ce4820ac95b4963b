//! Experiment configuration.
//!
//! Configs are TOML. Every field has a default, so an empty file is a valid
//! config; unknown keys are rejected. Channel and MAC parameters live in the
//! `[channel]` and `[wifi]` tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::wifi_dcf::WifiParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Area-uniform over the cell disk.
    UniformDisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Users with only an LTE-U interface.
    pub k_lte_only: u32,
    /// Users with only a WiFi interface.
    pub m_wifi_only: u32,
    /// Users with both interfaces.
    pub n_dual: u32,

    pub num_rbs: u32,
    /// Hz per resource block.
    pub rb_bandwidth: f64,
    /// Seconds.
    pub tti: f64,
    pub window_ttis: u32,
    pub total_windows: u32,
    /// Fraction of each window during which LTE-U transmits. WiFi contends
    /// in the remainder when the medium is shared.
    pub lte_on_fraction: f64,
    /// LTE-U and WiFi share the unlicensed medium in joint mode.
    pub shared_airtime: bool,

    /// Minimum per-user rate, bits/s.
    pub r_min: f64,
    pub count_max: u32,
    /// Count violations cumulatively instead of consecutively.
    pub cumulative_violations: bool,
    /// PF averaging constant, TTIs.
    pub tau: f64,
    /// Floor and initial value of the PF average, bits/s.
    pub pf_epsilon: f64,
    /// In joint mode, weight with which the rate a dual user received over
    /// WiFi in the previous window is folded into its PF average. 0 keeps
    /// the LTE scheduler blind to WiFi, 1 counts it in full.
    pub pf_wifi_weight: f64,
    /// Fraction of WiFi link rate left after MAC overhead, used by the
    /// optimizer's airtime projection.
    pub mac_efficiency: f64,

    /// Peak LTE rate per user, bits/s.
    pub lte_cap: f64,
    /// Peak WiFi rate per user, bits/s.
    pub wifi_cap: f64,

    pub seed: u64,
    pub placement: Placement,

    pub channel: ChannelParams,
    pub wifi: WifiParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            k_lte_only: 30,
            m_wifi_only: 30,
            n_dual: 40,
            num_rbs: 100,
            rb_bandwidth: 180e3,
            tti: 1e-3,
            window_ttis: 100,
            total_windows: 100,
            lte_on_fraction: 0.6,
            shared_airtime: true,
            r_min: 0.2e6,
            count_max: 5,
            cumulative_violations: false,
            tau: 100.0,
            pf_epsilon: 1.0,
            pf_wifi_weight: 0.8,
            mac_efficiency: 0.5,
            lte_cap: 3e6,
            wifi_cap: 5e6,
            seed: 1,
            placement: Placement::UniformDisk,
            channel: ChannelParams::default(),
            wifi: WifiParams::default(),
        }
    }
}

impl SimConfig {
    pub fn num_ues(&self) -> usize {
        (self.k_lte_only + self.m_wifi_only + self.n_dual) as usize
    }

    pub fn window_duration(&self) -> f64 {
        self.window_ttis as f64 * self.tti
    }

    /// TTIs per window during which LTE-U is on.
    pub fn lte_on_ttis(&self) -> u32 {
        ((self.lte_on_fraction * self.window_ttis as f64).round() as u32).min(self.window_ttis)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::config(toml_key(&e, text), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ues() == 0 {
            return Err(Error::config("k_lte_only", "k_lte_only + m_wifi_only + n_dual must be >= 1"));
        }
        let positive = [
            ("rb_bandwidth", self.rb_bandwidth),
            ("tti", self.tti),
            ("r_min", self.r_min),
            ("pf_epsilon", self.pf_epsilon),
            ("lte_cap", self.lte_cap),
            ("wifi_cap", self.wifi_cap),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be a finite value > 0"));
            }
        }
        if self.num_rbs == 0 {
            return Err(Error::config("num_rbs", "must be >= 1"));
        }
        if self.window_ttis == 0 {
            return Err(Error::config("window_ttis", "must be >= 1"));
        }
        if self.count_max == 0 {
            return Err(Error::config("count_max", "must be >= 1"));
        }
        if !(self.tau >= 1.0) {
            return Err(Error::config("tau", "must be >= 1"));
        }
        if !(self.lte_on_fraction >= 0.0 && self.lte_on_fraction <= 1.0) {
            return Err(Error::config("lte_on_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.pf_wifi_weight) {
            return Err(Error::config("pf_wifi_weight", "must lie in [0, 1]"));
        }
        if !(self.mac_efficiency > 0.0 && self.mac_efficiency <= 1.0) {
            return Err(Error::config("mac_efficiency", "must lie in (0, 1]"));
        }
        self.channel.validate()?;
        self.wifi.validate()
    }
}

/// Dotted key a TOML error refers to: the quoted field for unknown-field
/// errors, otherwise the key on the line the error points at.
fn toml_key(err: &toml::de::Error, text: &str) -> String {
    let msg = err.message();
    if msg.starts_with("unknown field") {
        if let Some(field) = msg.split('`').nth(1) {
            return field.to_string();
        }
    }
    let Some(span) = err.span() else {
        return "<syntax>".to_string();
    };
    let before = &text[..span.start.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[line_start..].find('\n').map_or(text.len(), |i| line_start + i);
    let line = &text[line_start..line_end];
    let Some((key, _)) = line.split_once('=') else {
        return "<syntax>".to_string();
    };
    let table = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    match table {
        Some(t) => format!("{t}.{}", key.trim()),
        None => key.trim().to_string(),
    }
}
