//! Oracles and fixtures shared by the integration tests and the acceptance
//! runner.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use coexsim::joint::{global_optimize, OptUe, RateAllocation, RateCaps};
use coexsim::lte_pf::{allocate_tti, Candidate, PfState};
use coexsim::wifi_dcf::{draw_backoff, WifiMedium, WifiParams};
use coexsim::{run, Capability, Mode, SimConfig, SimReport, UeId};

pub const SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Reports indexed `[seed][mode]`, modes in `Mode::ALL` order.
pub fn sweep(config: &SimConfig, seeds: &[u64]) -> Vec<[SimReport; 3]> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SimConfig { seed, ..config.clone() };
            Mode::ALL.map(|m| run(&cfg, m).expect("run succeeds"))
        })
        .collect()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

// ---------------------------------------------------------------- PF

/// Per-RB brute force: every RB, in index order, goes to the argmax of
/// `rate / avg` among candidates that still have budget, lowest id on ties.
pub fn pf_oracle(cands: &[Candidate], state: &PfState, num_rbs: usize, tti: f64) -> Vec<Option<UeId>> {
    let mut out = vec![None; num_rbs];
    let mut won = vec![0u32; cands.len()];
    for slot in out.iter_mut() {
        let mut best: Option<(f64, UeId, usize)> = None;
        for (i, c) in cands.iter().enumerate() {
            if let Some(cap) = c.max_bits {
                if won[i] as f64 * c.rate_per_rb * tti >= cap {
                    continue;
                }
            }
            let m = c.rate_per_rb / state.avg(c.ue).unwrap();
            let better = match best {
                None => true,
                Some((bm, bue, _)) => m > bm || (m == bm && c.ue < bue),
            };
            if better {
                best = Some((m, c.ue, i));
            }
        }
        if let Some((_, ue, i)) = best {
            *slot = Some(ue);
            won[i] += 1;
        }
    }
    out
}

pub struct PfInstance {
    pub cands: Vec<Candidate>,
    pub state: PfState,
    pub num_rbs: usize,
    pub tti: f64,
}

/// Up to 5 users and 6 RBs. Rates and averages come from a small grid so
/// exact metric ties occur; a third of the users carry a bit budget.
pub fn random_pf_instance(rng: &mut impl Rng) -> PfInstance {
    let n = rng.random_range(1..=5u32);
    let num_rbs = rng.random_range(1..=6usize);
    let tti = 1e-3;
    let mut ids: Vec<u32> = (0..10).collect();
    ids.sort_by_key(|_| rng.random::<u32>());
    ids.truncate(n as usize);
    let mut state = PfState::new(ids.iter().map(|&i| UeId(i)), 100.0, 1e-12).unwrap();
    let mut cands = Vec::new();
    for &id in &ids {
        let rate = 1e5 * rng.random_range(1..=8) as f64;
        state.set_avg(UeId(id), 1e5 * rng.random_range(1..=4) as f64);
        let mut c = Candidate::new(UeId(id), rate);
        if rng.random_bool(1.0 / 3.0) {
            c.max_bits = Some(rate * tti * rng.random_range(1..=3) as f64);
        }
        cands.push(c);
    }
    PfInstance { cands, state, num_rbs, tti }
}

/// Number of instances out of `count` where `allocate_tti` disagrees with
/// the brute force.
pub fn pf_mismatches(count: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .filter(|_| {
            let inst = random_pf_instance(&mut rng);
            let got = allocate_tti(&inst.cands, &inst.state, inst.num_rbs, inst.tti).unwrap();
            got.assignment != pf_oracle(&inst.cands, &inst.state, inst.num_rbs, inst.tti)
        })
        .count()
}

// ---------------------------------------------------------- optimizer

pub struct OptInstance {
    pub ues: Vec<OptUe>,
    pub r_min: f64,
    pub caps: RateCaps,
    pub retrain: BTreeSet<UeId>,
}

pub fn random_opt_instance(rng: &mut impl Rng) -> OptInstance {
    let n = rng.random_range(1..=4u32);
    let ues = (0..n)
        .map(|i| {
            let capability = match rng.random_range(0..3) {
                0 => Capability::LteOnly,
                1 => Capability::WifiOnly,
                _ => Capability::Dual,
            };
            let lte_rate = if capability.has_lte() { rng.random_range(1.0..10.0) } else { 0.0 };
            let wifi_rate = if capability.has_wifi() && rng.random_bool(0.85) { rng.random_range(1.0..10.0) } else { 0.0 };
            OptUe { id: UeId(i), capability, lte_rate, wifi_rate }
        })
        .collect::<Vec<_>>();
    let retrain = ues.iter().filter(|_| rng.random_bool(0.5)).map(|u| u.id).collect();
    OptInstance {
        ues,
        r_min: rng.random_range(0.2..2.0),
        caps: RateCaps { lte: rng.random_range(2.0..8.0), wifi: rng.random_range(1.0..6.0) },
        retrain,
    }
}

/// Exhaustive optimum over LTE shares in steps of 1/10 and every WiFi
/// membership choice of the dual users, subject to every user reaching
/// `r_min`. `None` when no quantized point is feasible.
pub fn enumerate_optimum(inst: &OptInstance) -> Option<f64> {
    let ues = &inst.ues;
    let duals: Vec<usize> = (0..ues.len())
        .filter(|&i| ues[i].capability == Capability::Dual && ues[i].wifi_rate > 0.0)
        .collect();
    let lte_users: Vec<usize> = (0..ues.len()).filter(|&i| ues[i].capability.has_lte()).collect();
    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << duals.len()) {
        let member: Vec<bool> = (0..ues.len())
            .map(|i| match ues[i].capability {
                Capability::LteOnly => false,
                Capability::WifiOnly => ues[i].wifi_rate > 0.0,
                Capability::Dual => duals.iter().position(|&d| d == i).is_some_and(|k| mask >> k & 1 == 1),
            })
            .collect();
        let n_members = member.iter().filter(|&&m| m).count();
        let wifi: Vec<f64> = (0..ues.len())
            .map(|i| if member[i] { (ues[i].wifi_rate / n_members as f64).min(inst.caps.wifi) } else { 0.0 })
            .collect();
        let mut levels = vec![0u32; lte_users.len()];
        loop {
            if levels.iter().sum::<u32>() <= 10 {
                let mut rates = wifi.clone();
                for (k, &i) in lte_users.iter().enumerate() {
                    rates[i] += (levels[k] as f64 / 10.0 * ues[i].lte_rate).min(inst.caps.lte);
                }
                if rates.iter().all(|&r| r >= inst.r_min) {
                    let sum: f64 = rates.iter().sum();
                    best = Some(best.map_or(sum, |b: f64| b.max(sum)));
                }
            }
            // odometer over 0..=10 per LTE user
            let mut k = 0;
            while k < levels.len() && levels[k] == 10 {
                levels[k] = 0;
                k += 1;
            }
            if k == levels.len() {
                break;
            }
            levels[k] += 1;
        }
    }
    best
}

/// Rate each user would get from `alloc`, recomputed from shares and
/// membership rather than taken from the optimizer's own projection.
pub fn realized_rates(inst: &OptInstance, alloc: &RateAllocation) -> Vec<f64> {
    let n_members = alloc.wifi_members().len();
    inst.ues
        .iter()
        .map(|u| {
            let a = alloc.get(u.id).unwrap();
            let lte = (a.lte_share * u.lte_rate).min(inst.caps.lte);
            let wifi = if a.wifi_member { (u.wifi_rate / n_members as f64).min(inst.caps.wifi) } else { 0.0 };
            lte + wifi
        })
        .collect()
}

pub struct OptimizerCheck {
    pub instances: usize,
    pub skipped_infeasible: usize,
    pub worst_ratio: f64,
    pub violations: Vec<String>,
}

/// Runs the optimizer on `count` feasible instances, skipping infeasible
/// draws, and compares against the enumerated optimum.
pub fn check_optimizer(count: usize, seed: u64) -> OptimizerCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = OptimizerCheck { instances: 0, skipped_infeasible: 0, worst_ratio: f64::INFINITY, violations: vec![] };
    while out.instances < count {
        let inst = random_opt_instance(&mut rng);
        let Some(opt) = enumerate_optimum(&inst) else {
            out.skipped_infeasible += 1;
            continue;
        };
        out.instances += 1;
        let alloc = global_optimize(&inst.ues, &inst.retrain, inst.r_min, inst.caps);
        let rates = realized_rates(&inst, &alloc);
        let sum: f64 = rates.iter().sum();
        out.worst_ratio = out.worst_ratio.min(sum / opt);
        if alloc.total_lte_share() > 1.0 + 1e-9 {
            out.violations.push(format!("instance {}: LTE budget {}", out.instances, alloc.total_lte_share()));
        }
        for u in &inst.ues {
            let a = alloc.get(u.id).unwrap();
            let lte = a.lte_share * u.lte_rate;
            let bad = (!u.capability.has_lte() && a.lte_share > 0.0)
                || (!u.capability.has_wifi() && a.wifi_member)
                || lte > inst.caps.lte * (1.0 + 1e-9)
                || a.projected_rate > inst.caps.class_cap(u.capability) * (1.0 + 1e-9);
            if bad {
                out.violations.push(format!("instance {}: user {} breaks a cap or its class", out.instances, u.id));
            }
        }
    }
    out
}

// ---------------------------------------------------------------- DCF

/// Pearson statistic of `draws` backoff values in `[0, upper]`.
pub fn backoff_chi_square(upper: u32, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins = vec![0u64; upper as usize + 1];
    for _ in 0..draws {
        bins[draw_backoff(&mut rng, upper) as usize] += 1;
    }
    let expected = draws as f64 / bins.len() as f64;
    bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum()
}

/// Aggregate saturated throughput of `n` identical stations, bits/s, and
/// the highest backoff stage reached.
pub fn dcf_aggregate(n: u32, seed: u64, duration: f64, params: &WifiParams) -> (f64, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medium = WifiMedium::new();
    let rates = (0..n).map(|i| (UeId(i), params.phy_rate)).collect();
    let got = medium.run_window(&rates, params, duration, None, &mut rng);
    let stage = medium.stations().map(|s| s.stage).max().unwrap_or(0).max(medium.counts.max_stage);
    (got.values().sum::<f64>() / duration, stage)
}

/// Mean aggregate throughput over `seeds` for each station count.
pub fn dcf_trend(counts: &[u32], seeds: &[u64], duration: f64) -> Vec<(u32, f64, u32)> {
    let params = WifiParams::default();
    counts
        .iter()
        .map(|&n| {
            let runs: Vec<(f64, u32)> = seeds.par_iter().map(|&s| dcf_aggregate(n, s, duration, &params)).collect();
            (n, mean(runs.iter().map(|r| r.0)), runs.iter().map(|r| r.1).max().unwrap_or(0))
        })
        .collect()
}

// ------------------------------------------------------------ deferral

/// Small cell without fading and a lightly loaded WiFi medium. Weak LTE
/// power leaves the edge users short under plain PF, so triggers fire, but
/// the optimizer can always lift them to `r_min`.
pub fn abundant_config() -> SimConfig {
    let mut cfg = SimConfig {
        k_lte_only: 10,
        m_wifi_only: 2,
        n_dual: 2,
        total_windows: 60,
        count_max: 3,
        r_min: 0.6e6,
        shared_airtime: false,
        ..SimConfig::default()
    };
    cfg.channel.cell_radius = 140.0;
    cfg.channel.fading_enabled = false;
    cfg.channel.tx_power_lte_dbm = 15.0;
    cfg
}

pub struct RecoveryCheck {
    pub triggers: usize,
    pub retrained_users: usize,
    pub failures: Vec<String>,
}

/// Every user in a retrain set must reach `r_min` in the window right after
/// the trigger. Triggers in the final window have no following window and
/// are not counted.
pub fn check_recovery(config: &SimConfig, seeds: &[u64]) -> RecoveryCheck {
    let reports: Vec<SimReport> = seeds
        .par_iter()
        .map(|&seed| run(&SimConfig { seed, ..config.clone() }, Mode::Joint).unwrap())
        .collect();
    let mut out = RecoveryCheck { triggers: 0, retrained_users: 0, failures: vec![] };
    for r in &reports {
        for ev in &r.retrains {
            let next = ev.window + 1;
            if next >= config.total_windows as usize {
                continue;
            }
            out.triggers += 1;
            for ue in &ev.retrain_set {
                out.retrained_users += 1;
                let rate = r.ues[ue.index()].window_rates[next];
                if rate < config.r_min {
                    out.failures.push(format!("seed {} window {next} user {ue}: {rate:.0} bps", r.seed));
                }
            }
        }
    }
    out
}

// --------------------------------------------------------- dual users

pub struct DualBenefit {
    pub duals: usize,
    pub benefiting: usize,
}

/// Per dual user index: mean over seeds of the joint rate against the mean
/// over seeds of the better single-interface rate.
pub fn dual_benefit(config: &SimConfig, runs: &[[SimReport; 3]]) -> DualBenefit {
    let first = (config.k_lte_only + config.m_wifi_only) as usize;
    let rates: Vec<[Vec<f64>; 3]> = runs.iter().map(|r| [0, 1, 2].map(|m| r[m].long_run_rates())).collect();
    let benefiting = (first..config.num_ues())
        .filter(|&i| {
            let joint = mean(rates.iter().map(|r| r[2][i]));
            let single = mean(rates.iter().map(|r| r[0][i].max(r[1][i])));
            joint >= single
        })
        .count();
    DualBenefit { duals: config.n_dual as usize, benefiting }
}
