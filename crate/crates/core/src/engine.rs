//! Experiment driver: population, per-window channel draws, and the three
//! scheduling modes.
//!
//! Placement, channel and MAC randomness come from separate ChaCha streams
//! of the master seed, so toggling fading or switching mode never perturbs
//! user positions.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_fading, snr_to_rate, Interface};
use crate::config::{Placement, SimConfig};
use crate::error::{Error, Result};
use crate::joint::{global_optimize, DeferralState, OptUe, RateAllocation, RateCaps};
use crate::lte_pf::{allocate_tti, Candidate, PfState};
use crate::metrics::{compute_stats, SchedulerStats};
use crate::wifi_dcf::WifiMedium;
use crate::{Capability, UeId};

const PLACEMENT_STREAM: u64 = 1;
const CHANNEL_STREAM: u64 = 2;
const MAC_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Lte,
    Wifi,
    Joint,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Lte, Mode::Wifi, Mode::Joint];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lte => "lte",
            Mode::Wifi => "wifi",
            Mode::Joint => "joint",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lte" => Ok(Mode::Lte),
            "wifi" => Ok(Mode::Wifi),
            "joint" => Ok(Mode::Joint),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub id: UeId,
    pub capability: Capability,
    /// Distance from the cell center, meters.
    pub position: f64,
    pub cumulative_bits: f64,
    /// Delivered rate in each elapsed window, bits/s.
    pub window_rates: Vec<f64>,
}

/// One global re-optimization in joint mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrainEvent {
    /// Window whose rates fired the trigger. The new allocation applies
    /// from the next window on.
    pub window: usize,
    pub retrain_set: BTreeSet<UeId>,
    pub allocation: RateAllocation,
}

/// How often each sub-scheduler ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub lte_ttis: u64,
    pub wifi_slots: u64,
    pub optimizer_calls: u64,
    /// Highest DCF backoff stage reached by any station.
    pub max_wifi_stage: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub mode: Mode,
    pub seed: u64,
    pub window_duration: f64,
    pub ues: Vec<UeState>,
    pub stats: SchedulerStats,
    pub retrains: Vec<RetrainEvent>,
    pub counters: EngineCounters,
}

impl SimReport {
    /// Long-run rate of every user, bits/s, in id order.
    pub fn long_run_rates(&self) -> Vec<f64> {
        let total = self.window_duration * self.ues.first().map_or(0, |u| u.window_rates.len()) as f64;
        self.ues.iter().map(|u| u.cumulative_bits / total).collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `k_lte_only` LTE-only users first, then WiFi-only, then dual.
pub fn build_population<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Vec<UeState> {
    let classes = std::iter::repeat_n(Capability::LteOnly, config.k_lte_only as usize)
        .chain(std::iter::repeat_n(Capability::WifiOnly, config.m_wifi_only as usize))
        .chain(std::iter::repeat_n(Capability::Dual, config.n_dual as usize));
    classes
        .enumerate()
        .map(|(i, capability)| {
            let position = match config.placement {
                Placement::UniformDisk => {
                    // (0, 1], so the position is never 0.
                    let u = 1.0 - rng.random::<f64>();
                    config.channel.cell_radius * u.sqrt()
                }
            };
            UeState {
                id: UeId(i as u32),
                capability,
                position,
                cumulative_bits: 0.0,
                window_rates: Vec::new(),
            }
        })
        .collect()
}

/// Link rates of one user for the current fading block.
#[derive(Debug, Clone, Copy, Default)]
struct LinkRates {
    /// Bits/s on one RB.
    lte_per_rb: f64,
    /// WiFi link rate, zero when the station cannot associate.
    wifi_phy: f64,
}

struct Cell<'a> {
    config: &'a SimConfig,
    mode: Mode,
    ues: Vec<UeState>,
    fading: Vec<(f64, f64)>,
    links: Vec<LinkRates>,
    pf: PfState,
    wifi: WifiMedium,
    deferral: DeferralState,
    allocation: Option<RateAllocation>,
    /// WiFi rate of each user in the previous window, bits/s.
    last_wifi_rate: Vec<f64>,
    channel_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    retrains: Vec<RetrainEvent>,
    counters: EngineCounters,
}

impl<'a> Cell<'a> {
    fn new(config: &'a SimConfig, mode: Mode) -> Result<Self> {
        let ues = build_population(config, &mut stream(config.seed, PLACEMENT_STREAM));
        let lte_ids: Vec<UeId> = ues.iter().filter(|u| u.capability.has_lte()).map(|u| u.id).collect();
        let pf = PfState::new(lte_ids, config.tau, config.pf_epsilon)?;
        let deferral = DeferralState::new(
            ues.iter().map(|u| u.id),
            config.count_max,
            config.r_min,
            config.cumulative_violations,
        );
        let n = ues.len();
        Ok(Self {
            config,
            mode,
            ues,
            fading: vec![(1.0, 1.0); n],
            links: vec![LinkRates::default(); n],
            pf,
            wifi: WifiMedium::new(),
            deferral,
            allocation: None,
            last_wifi_rate: vec![0.0; n],
            channel_rng: stream(config.seed, CHANNEL_STREAM),
            mac_rng: stream(config.seed, MAC_STREAM),
            retrains: Vec::new(),
            counters: EngineCounters::default(),
        })
    }

    fn update_channel(&mut self, window: usize) -> Result<()> {
        let ch = &self.config.channel;
        if ch.fading_enabled && window.is_multiple_of(ch.fading_block_len as usize) {
            for f in self.fading.iter_mut() {
                *f = (draw_fading(&mut self.channel_rng), draw_fading(&mut self.channel_rng));
            }
        }
        let cfg = self.config;
        for (i, ue) in self.ues.iter().enumerate() {
            let (f_lte, f_wifi) = self.fading[i];
            let mut link = LinkRates::default();
            if ue.capability.has_lte() {
                let snr = ch.snr_db(ue.position, Interface::Lte, f_lte)?;
                link.lte_per_rb = snr_to_rate(snr, cfg.rb_bandwidth, ch.efficiency, cfg.lte_cap);
            }
            if ue.capability.has_wifi() {
                let snr = ch.snr_db(ue.position, Interface::Wifi, f_wifi)?;
                if snr >= cfg.wifi.min_snr_db {
                    link.wifi_phy = snr_to_rate(snr, cfg.wifi.bandwidth, ch.efficiency, cfg.wifi.phy_rate);
                }
            }
            self.links[i] = link;
        }
        Ok(())
    }

    /// Seconds of WiFi airtime in one window for the current mode.
    fn wifi_airtime(&self) -> f64 {
        let cfg = self.config;
        match self.mode {
            Mode::Lte => 0.0,
            Mode::Wifi => cfg.window_duration(),
            Mode::Joint if cfg.shared_airtime => (cfg.window_ttis - cfg.lte_on_ttis()) as f64 * cfg.tti,
            Mode::Joint => cfg.window_duration(),
        }
    }

    fn run_lte(&mut self, bits: &mut [f64]) -> Result<()> {
        let cfg = self.config;
        let on = cfg.lte_on_ttis();
        if on == 0 {
            return Ok(());
        }
        let num_rbs = cfg.num_rbs as usize;
        let tti_cap = cfg.lte_cap * cfg.tti;

        // RBs owed over the window to users holding a guaranteed share.
        // Only the users handed to the optimizer get hard reservations;
        // everyone else stays under plain PF.
        let mut owed: BTreeMap<UeId, (u64, u64)> = BTreeMap::new();
        if let (Some(alloc), Some(event)) = (&self.allocation, self.retrains.last()) {
            for (ue, a) in &alloc.ues {
                if a.guaranteed_share > 0.0 && event.retrain_set.contains(ue) {
                    let total = (a.guaranteed_share * num_rbs as f64 * on as f64 - 1e-9).ceil().max(0.0) as u64;
                    owed.insert(*ue, (total, 0));
                }
            }
        }

        let base: Vec<Candidate> = self
            .ues
            .iter()
            .zip(&self.links)
            .filter(|(u, l)| u.capability.has_lte() && l.lte_per_rb > 0.0)
            .map(|(u, l)| Candidate {
                ue: u.id,
                rate_per_rb: l.lte_per_rb,
                max_bits: Some(tti_cap),
                reserved_rbs: 0,
            })
            .collect();

        // WiFi rate folded into the PF average, expressed per ON-time so it
        // is commensurate with the per-TTI LTE rates.
        let mut offset = BTreeMap::new();
        if self.mode == Mode::Joint && cfg.pf_wifi_weight > 0.0 {
            let on_frac = on as f64 / cfg.window_ttis as f64;
            for (ue, &w) in self.ues.iter().zip(&self.last_wifi_rate) {
                if ue.capability.has_lte() && w > 0.0 {
                    offset.insert(ue.id, cfg.pf_wifi_weight * w / on_frac);
                }
            }
        }

        for t in 0..on as u64 {
            let mut cands = base.clone();
            let mut free = num_rbs as u64;
            for c in cands.iter_mut() {
                if let Some((total, given)) = owed.get_mut(&c.ue) {
                    // Spread the reservation evenly, front-loading remainders.
                    let target = ((t + 1) * *total).div_ceil(on as u64);
                    let r = target.saturating_sub(*given).min(free);
                    c.reserved_rbs = r as u32;
                    *given += r;
                    free -= r;
                }
            }
            let alloc = allocate_tti(&cands, &self.pf, num_rbs, cfg.tti)?;
            let mut rates = offset.clone();
            for (&ue, &b) in &alloc.achieved {
                bits[ue.index()] += b;
                *rates.entry(ue).or_insert(0.0) += b / cfg.tti;
            }
            self.pf.update_average(&rates);
            self.counters.lte_ttis += 1;
        }
        Ok(())
    }

    fn run_wifi(&mut self, bits: &mut [f64]) {
        let airtime = self.wifi_airtime();
        if airtime <= 0.0 {
            return;
        }
        let members: Option<BTreeSet<UeId>> = match (&self.mode, &self.allocation) {
            (Mode::Joint, Some(a)) => Some(a.wifi_members()),
            _ => None,
        };
        let phy: BTreeMap<UeId, f64> = self
            .ues
            .iter()
            .zip(&self.links)
            .filter(|(u, l)| u.capability.has_wifi() && l.wifi_phy > 0.0)
            .filter(|(u, _)| members.as_ref().is_none_or(|m| m.contains(&u.id)))
            .map(|(u, l)| (u.id, l.wifi_phy))
            .collect();
        let budget = self.config.wifi_cap * self.config.window_duration();
        let before = self.wifi.counts;
        let got = self.wifi.run_window(&phy, &self.config.wifi, airtime, Some(budget), &mut self.mac_rng);
        let after = self.wifi.counts;
        self.counters.wifi_slots += (after.idle + after.success + after.collision) - (before.idle + before.success + before.collision);
        self.counters.max_wifi_stage = after.max_stage;
        let dur = self.config.window_duration();
        self.last_wifi_rate.iter_mut().for_each(|r| *r = 0.0);
        for (ue, b) in got {
            bits[ue.index()] += b;
            self.last_wifi_rate[ue.index()] = b / dur;
        }
    }

    fn optimize(&mut self, window: usize, rates: &BTreeMap<UeId, f64>) {
        let triggered = self.deferral.record_window(rates);
        if !triggered {
            return;
        }
        let retrain = self.deferral.select_retrain_set(rates, true);
        let cfg = self.config;
        let on_frac = cfg.lte_on_ttis() as f64 / cfg.window_ttis as f64;
        let wifi_frac = self.wifi_airtime() / cfg.window_duration();
        let opt_ues: Vec<OptUe> = self
            .ues
            .iter()
            .zip(&self.links)
            .map(|(u, l)| OptUe {
                id: u.id,
                capability: u.capability,
                lte_rate: l.lte_per_rb * cfg.num_rbs as f64 * on_frac,
                wifi_rate: l.wifi_phy * cfg.mac_efficiency * wifi_frac,
            })
            .collect();
        let caps = RateCaps {
            lte: cfg.lte_cap * on_frac,
            wifi: cfg.wifi_cap,
        };
        let allocation = global_optimize(&opt_ues, &retrain, cfg.r_min, caps);
        self.counters.optimizer_calls += 1;
        self.deferral.consume_trigger(&retrain);
        self.retrains.push(RetrainEvent {
            window,
            retrain_set: retrain,
            allocation: allocation.clone(),
        });
        self.allocation = Some(allocation);
    }

    fn step(&mut self, window: usize) -> Result<()> {
        self.update_channel(window)?;
        let mut bits = vec![0.0; self.ues.len()];
        if matches!(self.mode, Mode::Lte | Mode::Joint) {
            self.run_lte(&mut bits)?;
        }
        if matches!(self.mode, Mode::Wifi | Mode::Joint) {
            self.run_wifi(&mut bits);
        }
        let dur = self.config.window_duration();
        let mut rates = BTreeMap::new();
        for (ue, b) in self.ues.iter_mut().zip(bits) {
            ue.cumulative_bits += b;
            ue.window_rates.push(b / dur);
            rates.insert(ue.id, b / dur);
        }
        if self.mode == Mode::Joint {
            self.optimize(window, &rates);
        }
        Ok(())
    }
}

/// Runs one experiment. Deterministic in `(config, mode)`.
pub fn run(config: &SimConfig, mode: Mode) -> Result<SimReport> {
    config.validate()?;
    if config.total_windows == 0 {
        return Err(Error::NoWindows);
    }
    let mut cell = Cell::new(config, mode)?;
    for w in 0..config.total_windows as usize {
        cell.step(w)?;
    }
    let total_time = config.window_duration() * config.total_windows as f64;
    let long_run: Vec<f64> = cell.ues.iter().map(|u| u.cumulative_bits / total_time).collect();
    let stats = compute_stats(&long_run, config.r_min)?;
    Ok(SimReport {
        mode,
        seed: config.seed,
        window_duration: config.window_duration(),
        ues: cell.ues,
        stats,
        retrains: cell.retrains,
        counters: cell.counters,
    })
}
