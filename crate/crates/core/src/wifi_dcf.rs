//! Slot-level CSMA/CA with binary exponential backoff for saturated
//! stations.
//!
//! A slot in which no counter is zero is idle and every counter decrements.
//! A single station at zero transmits successfully. Two or more collide,
//! step up their backoff stage and redraw from the doubled window. Counters
//! are frozen during busy periods.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::UeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WifiParams {
    /// Seconds.
    pub slot_time: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub max_stage: u32,
    pub payload_bits: f64,
    /// DIFS + SIFS + ACK, plus RTS/CTS when enabled. Seconds.
    pub success_overhead: f64,
    /// Airtime lost to a collision. Seconds.
    pub collision_overhead: f64,
    /// Highest link rate any station can reach, bits/s.
    pub phy_rate: f64,
    pub rts_enabled: bool,
    /// Channel bandwidth used to map SNR to link rate, Hz.
    pub bandwidth: f64,
    /// Stations below this SNR cannot associate with the access point.
    pub min_snr_db: f64,
}

impl Default for WifiParams {
    fn default() -> Self {
        Self {
            slot_time: 9e-6,
            cw_min: 16,
            cw_max: 1024,
            max_stage: 6,
            payload_bits: 12_000.0,
            success_overhead: 150e-6,
            collision_overhead: 60e-6,
            phy_rate: 65e6,
            rts_enabled: true,
            bandwidth: 20e6,
            min_snr_db: 5.0,
        }
    }
}

impl WifiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.slot_time > 0.0) {
            return Err(Error::config("wifi.slot_time", "must be > 0"));
        }
        if self.cw_min < 1 || !self.cw_min.is_power_of_two() {
            return Err(Error::config("wifi.cw_min", "must be a power of two >= 1"));
        }
        if self.cw_max < self.cw_min || !self.cw_max.is_power_of_two() {
            return Err(Error::config("wifi.cw_max", "must be a power of two >= cw_min"));
        }
        if !(self.payload_bits > 0.0) {
            return Err(Error::config("wifi.payload_bits", "must be > 0"));
        }
        if !(self.success_overhead >= 0.0) {
            return Err(Error::config("wifi.success_overhead", "must be >= 0"));
        }
        if !(self.collision_overhead >= 0.0) {
            return Err(Error::config("wifi.collision_overhead", "must be >= 0"));
        }
        if self.rts_enabled && self.collision_overhead > self.success_overhead {
            return Err(Error::config(
                "wifi.collision_overhead",
                "must not exceed success_overhead when RTS/CTS is enabled",
            ));
        }
        if !(self.phy_rate > 0.0) {
            return Err(Error::config("wifi.phy_rate", "must be > 0"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::config("wifi.bandwidth", "must be > 0"));
        }
        if !self.min_snr_db.is_finite() {
            return Err(Error::config("wifi.min_snr_db", "must be finite"));
        }
        Ok(())
    }
}

/// Inclusive upper bound of the backoff draw at `stage`:
/// `min(2^stage * cw_min, cw_max) - 1`.
pub fn contention_window(stage: u32, params: &WifiParams) -> u32 {
    let cw = 1u64
        .checked_shl(stage)
        .and_then(|p| p.checked_mul(params.cw_min as u64))
        .map_or(params.cw_max as u64, |w| w.min(params.cw_max as u64));
    (cw - 1) as u32
}

/// Uniform integer in `[0, upper]`.
pub fn draw_backoff<R: Rng + ?Sized>(rng: &mut R, upper: u32) -> u32 {
    rng.random_range(0..=upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WifiStationState {
    pub ue_id: UeId,
    /// Successive collisions of the head-of-line frame.
    pub stage: u32,
    pub backoff: u32,
    pub delivered_bits: f64,
    /// Link rate of this station, bits/s.
    pub phy_rate: f64,
}

impl WifiStationState {
    pub fn new<R: Rng + ?Sized>(ue_id: UeId, phy_rate: f64, params: &WifiParams, rng: &mut R) -> Self {
        Self {
            ue_id,
            stage: 0,
            backoff: draw_backoff(rng, contention_window(0, params)),
            delivered_bits: 0.0,
            phy_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    Success(UeId),
    Collision(Vec<UeId>),
}

/// Advances the medium by one contention slot. Returns the outcome and the
/// airtime it consumed.
pub fn step_slot<R: Rng + ?Sized>(
    stations: &mut [WifiStationState],
    params: &WifiParams,
    rng: &mut R,
) -> (SlotOutcome, f64) {
    let ready: Vec<usize> = stations
        .iter()
        .enumerate()
        .filter(|(_, s)| s.backoff == 0)
        .map(|(i, _)| i)
        .collect();

    match ready.as_slice() {
        [] => {
            for s in stations.iter_mut() {
                s.backoff -= 1;
            }
            (SlotOutcome::Idle, params.slot_time)
        }
        &[i] => {
            let s = &mut stations[i];
            s.delivered_bits += params.payload_bits;
            s.stage = 0;
            s.backoff = draw_backoff(rng, contention_window(0, params));
            let airtime = params.slot_time + params.success_overhead + params.payload_bits / s.phy_rate;
            (SlotOutcome::Success(s.ue_id), airtime)
        }
        many => {
            let mut ids = Vec::with_capacity(many.len());
            for &i in many {
                let s = &mut stations[i];
                s.stage = (s.stage + 1).min(params.max_stage);
                s.backoff = draw_backoff(rng, contention_window(s.stage, params));
                ids.push(s.ue_id);
            }
            (SlotOutcome::Collision(ids), params.slot_time + params.collision_overhead)
        }
    }
}

/// Counters accumulated by [`WifiMedium::run_window`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotCounts {
    pub idle: u64,
    pub success: u64,
    pub collision: u64,
    /// Highest backoff stage any station reached.
    pub max_stage: u32,
}

/// Per-station state that persists across windows, plus the airtime by
/// which the last frame of a window overran its end.
#[derive(Debug, Clone, Default)]
pub struct WifiMedium {
    stations: BTreeMap<UeId, WifiStationState>,
    overrun: f64,
    pub counts: SlotCounts,
}

impl WifiMedium {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn station(&self, ue: UeId) -> Option<&WifiStationState> {
        self.stations.get(&ue)
    }

    pub fn stations(&self) -> impl Iterator<Item = &WifiStationState> {
        self.stations.values()
    }

    /// Runs the members in `phy_rates` for `duration` seconds of airtime.
    ///
    /// Stations are created on first use and keep their backoff state while
    /// absent. A station whose window delivery reaches `bit_budget` stops
    /// contending for the rest of the window. Returns the bits delivered per
    /// member.
    pub fn run_window<R: Rng + ?Sized>(
        &mut self,
        phy_rates: &BTreeMap<UeId, f64>,
        params: &WifiParams,
        duration: f64,
        bit_budget: Option<f64>,
        rng: &mut R,
    ) -> BTreeMap<UeId, f64> {
        let mut active: Vec<WifiStationState> = Vec::with_capacity(phy_rates.len());
        for (&ue, &rate) in phy_rates {
            let mut st = match self.stations.remove(&ue) {
                Some(s) => s,
                None => WifiStationState::new(ue, rate, params, rng),
            };
            st.phy_rate = rate;
            active.push(st);
        }
        let start: BTreeMap<UeId, f64> = active.iter().map(|s| (s.ue_id, s.delivered_bits)).collect();
        let mut done: Vec<WifiStationState> = Vec::new();

        let mut t = self.overrun.min(duration);
        self.overrun -= t;
        while t < duration && !active.is_empty() {
            let (outcome, airtime) = step_slot(&mut active, params, rng);
            t += airtime;
            match outcome {
                SlotOutcome::Idle => self.counts.idle += 1,
                SlotOutcome::Collision(_) => {
                    self.counts.collision += 1;
                    let peak = active.iter().map(|s| s.stage).max().unwrap_or(0);
                    self.counts.max_stage = self.counts.max_stage.max(peak);
                }
                SlotOutcome::Success(ue) => {
                    self.counts.success += 1;
                    if let Some(budget) = bit_budget {
                        let i = active.iter().position(|s| s.ue_id == ue).unwrap();
                        if active[i].delivered_bits - start[&ue] >= budget {
                            done.push(active.swap_remove(i));
                            active.sort_by_key(|s| s.ue_id);
                        }
                    }
                }
            }
        }
        self.overrun += (t - duration).max(0.0);

        let mut delivered = BTreeMap::new();
        for s in active.into_iter().chain(done) {
            delivered.insert(s.ue_id, s.delivered_bits - start[&s.ue_id]);
            self.stations.insert(s.ue_id, s);
        }
        delivered
    }
}

/// Runs fresh stations for one window and returns per-station throughput in
/// bits/s.
pub fn run_wifi_window<R: Rng + ?Sized>(
    stations: &mut [WifiStationState],
    params: &WifiParams,
    window_duration: f64,
    rng: &mut R,
) -> Result<BTreeMap<UeId, f64>> {
    if !(window_duration > 0.0) {
        return Err(Error::Domain(format!("window duration must be > 0, got {window_duration}")));
    }
    let start: Vec<f64> = stations.iter().map(|s| s.delivered_bits).collect();
    let mut t = 0.0;
    while t < window_duration && !stations.is_empty() {
        t += step_slot(stations, params, rng).1;
    }
    Ok(stations
        .iter()
        .zip(start)
        .map(|(s, b0)| (s.ue_id, (s.delivered_bits - b0) / window_duration))
        .collect())
}
