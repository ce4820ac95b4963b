//! Geometry to achievable-rate mapping.
//!
//! Log-distance path loss with optional unit-mean exponential block fading,
//! followed by a truncated Shannon mapping `eff * B * log2(1 + snr)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interface {
    Lte,
    Wifi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Meters.
    pub cell_radius: f64,
    pub pathloss_exponent: f64,
    /// Path loss at the 1 m reference distance, dB.
    pub ref_loss_db: f64,
    pub noise_floor_dbm: f64,
    pub tx_power_lte_dbm: f64,
    pub tx_power_wifi_dbm: f64,
    pub fading_enabled: bool,
    /// Number of measurement windows a fading draw is held for.
    pub fading_block_len: u32,
    /// Fraction of Shannon capacity realized by the link, in (0, 1].
    pub efficiency: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            cell_radius: 250.0,
            pathloss_exponent: 3.5,
            ref_loss_db: 40.0,
            noise_floor_dbm: -96.0,
            tx_power_lte_dbm: 40.0,
            tx_power_wifi_dbm: 26.0,
            fading_enabled: true,
            fading_block_len: 1,
            efficiency: 0.6,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_radius > 0.0) {
            return Err(Error::config("channel.cell_radius", "must be > 0"));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::config("channel.pathloss_exponent", "must be >= 2"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config("channel.efficiency", "must lie in (0, 1]"));
        }
        if self.fading_block_len == 0 {
            return Err(Error::config("channel.fading_block_len", "must be >= 1"));
        }
        for (key, v) in [
            ("channel.ref_loss_db", self.ref_loss_db),
            ("channel.noise_floor_dbm", self.noise_floor_dbm),
            ("channel.tx_power_lte_dbm", self.tx_power_lte_dbm),
            ("channel.tx_power_wifi_dbm", self.tx_power_wifi_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }

    fn tx_power_dbm(&self, interface: Interface) -> f64 {
        match interface {
            Interface::Lte => self.tx_power_lte_dbm,
            Interface::Wifi => self.tx_power_wifi_dbm,
        }
    }

    /// Received SNR in dB at `distance` meters.
    ///
    /// `fading_draw` is the linear power gain of the current fading block.
    /// It is ignored (treated as 1) when fading is disabled.
    pub fn snr_db(&self, distance: f64, interface: Interface, fading_draw: f64) -> Result<f64> {
        if !(distance > 0.0) {
            return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
        }
        let gain = if self.fading_enabled {
            if !(fading_draw > 0.0) {
                return Err(Error::Domain(format!(
                    "fading draw must be > 0 when fading is enabled, got {fading_draw}"
                )));
            }
            fading_draw
        } else {
            1.0
        };
        let path_loss = self.ref_loss_db + 10.0 * self.pathloss_exponent * distance.log10();
        Ok(self.tx_power_dbm(interface) - path_loss - self.noise_floor_dbm + 10.0 * gain.log10())
    }
}

/// Truncated Shannon rate in bits/s, clamped to `max_rate`.
pub fn snr_to_rate(snr_db: f64, bandwidth: f64, efficiency: f64, max_rate: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    let rate = efficiency * bandwidth * snr.ln_1p() / std::f64::consts::LN_2;
    rate.min(max_rate)
}

/// Unit-mean exponential power gain (Rayleigh block fading).
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let g: f64 = Exp1.sample(rng);
    // Exp1 can return exactly 0 with negligible probability.
    g.max(f64::MIN_POSITIVE)
}
