//! Deferral-based joint scheduling.
//!
//! Each window, every user whose delivered rate fell below `r_min` has its
//! violation counter bumped. Only when some counter reaches `count_max` is the
//! global optimizer run, over the whole population but with the offending
//! users (and everyone else currently below `r_min`) served first. Between
//! triggers the last allocation is kept.

use std::collections::{BTreeMap, BTreeSet};

use crate::{Capability, UeId};

#[derive(Debug, Clone, PartialEq)]
pub struct DeferralState {
    violations: BTreeMap<UeId, u32>,
    count_max: u32,
    r_min: f64,
    cumulative: bool,
}

impl DeferralState {
    /// `cumulative = false` resets a counter on every window at or above
    /// `r_min`; `true` only resets it when the user is retrained.
    pub fn new(ues: impl IntoIterator<Item = UeId>, count_max: u32, r_min: f64, cumulative: bool) -> Self {
        assert!(count_max >= 1, "count_max must be >= 1");
        assert!(r_min > 0.0, "r_min must be > 0");
        Self {
            violations: ues.into_iter().map(|u| (u, 0)).collect(),
            count_max,
            r_min,
            cumulative,
        }
    }

    pub fn count_max(&self) -> u32 {
        self.count_max
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn violations(&self, ue: UeId) -> u32 {
        self.violations.get(&ue).copied().unwrap_or(0)
    }

    /// Updates the counters with this window's rates. Returns whether any
    /// user reached `count_max`.
    pub fn record_window(&mut self, achieved: &BTreeMap<UeId, f64>) -> bool {
        let mut trigger = false;
        for (ue, count) in self.violations.iter_mut() {
            let rate = achieved.get(ue).copied().unwrap_or(0.0);
            if rate < self.r_min {
                *count = (*count + 1).min(self.count_max);
            } else if !self.cumulative {
                *count = 0;
            }
            trigger |= *count >= self.count_max;
        }
        trigger
    }

    /// Users at `count_max` plus every user below `r_min` this window.
    /// Empty unless `triggered`.
    pub fn select_retrain_set(&self, achieved: &BTreeMap<UeId, f64>, triggered: bool) -> BTreeSet<UeId> {
        if !triggered {
            return BTreeSet::new();
        }
        self.violations
            .iter()
            .filter(|(ue, &count)| {
                count >= self.count_max || achieved.get(ue).copied().unwrap_or(0.0) < self.r_min
            })
            .map(|(&ue, _)| ue)
            .collect()
    }

    /// Clears the counters of retrained users.
    pub fn consume_trigger(&mut self, retrained: &BTreeSet<UeId>) {
        for ue in retrained {
            if let Some(c) = self.violations.get_mut(ue) {
                *c = 0;
            }
        }
    }
}

/// What the optimizer knows about one user.
#[derive(Debug, Clone, PartialEq)]
pub struct OptUe {
    pub id: UeId,
    pub capability: Capability,
    /// Rate if the user held the whole LTE RB budget, bits/s.
    pub lte_rate: f64,
    /// Rate if the user had the WiFi airtime to itself, after MAC overhead.
    /// Zero when the user cannot associate.
    pub wifi_rate: f64,
}

/// Per-interface rate caps; a dual user's cap is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCaps {
    pub lte: f64,
    pub wifi: f64,
}

impl RateCaps {
    pub fn class_cap(&self, capability: Capability) -> f64 {
        match capability {
            Capability::LteOnly => self.lte,
            Capability::WifiOnly => self.wifi,
            Capability::Dual => self.lte + self.wifi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeAllocation {
    /// Fraction of the LTE RB budget, guaranteed plus surplus.
    pub lte_share: f64,
    /// Part of `lte_share` needed to reach `r_min`.
    pub guaranteed_share: f64,
    pub wifi_member: bool,
    pub projected_rate: f64,
    /// Set when `r_min` could not be met for this user.
    pub unsatisfied: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateAllocation {
    pub ues: BTreeMap<UeId, UeAllocation>,
}

impl RateAllocation {
    pub fn total_lte_share(&self) -> f64 {
        self.ues.values().map(|a| a.lte_share).sum()
    }

    pub fn projected_sum(&self) -> f64 {
        self.ues.values().map(|a| a.projected_rate).sum()
    }

    pub fn get(&self, ue: UeId) -> Option<&UeAllocation> {
        self.ues.get(&ue)
    }

    pub fn wifi_members(&self) -> BTreeSet<UeId> {
        self.ues.iter().filter(|(_, a)| a.wifi_member).map(|(&u, _)| u).collect()
    }
}

/// Ordering key of a candidate solution: fewer unmet retrain users, then
/// fewer unmet users overall, then larger projected sum.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    retrain_unmet: usize,
    unmet: usize,
    sum: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        (other.retrain_unmet, other.unmet) > (self.retrain_unmet, self.unmet)
            || ((other.retrain_unmet, other.unmet) == (self.retrain_unmet, self.unmet)
                && self.sum > other.sum * (1.0 + 1e-12) + 1e-9)
    }
}

/// Heuristic for maximizing the sum of user rates under a minimum rate,
/// per-class caps and the LTE RB budget.
///
/// For a fixed set of WiFi members the LTE side is a fractional knapsack:
/// first the minimum share that lifts each user to `r_min` (retrain set
/// first, then cheapest first), then the leftover budget to the highest LTE
/// rates up to their cap. WiFi airtime is split evenly among members.
/// Membership of dual users starts from the cheaper interface and is refined
/// by single-user toggles and pairwise swaps until no move improves the
/// score.
pub fn global_optimize(ues: &[OptUe], retrain: &BTreeSet<UeId>, r_min: f64, caps: RateCaps) -> RateAllocation {
    if ues.is_empty() {
        return RateAllocation::default();
    }

    let mut member: Vec<bool> = ues
        .iter()
        .map(|u| match u.capability {
            Capability::LteOnly => false,
            Capability::WifiOnly => u.wifi_rate > 0.0,
            Capability::Dual => {
                u.wifi_rate > 0.0 && (u.lte_rate <= 0.0 || r_min / u.wifi_rate < r_min / u.lte_rate)
            }
        })
        .collect();

    let (mut best_alloc, mut best) = evaluate(ues, &member, retrain, r_min, caps);
    let duals: Vec<usize> = (0..ues.len())
        .filter(|&i| ues[i].capability == Capability::Dual && ues[i].wifi_rate > 0.0)
        .collect();

    // Moves: toggle one dual user, or swap a member with a non-member. The
    // swap reaches points where a lone toggle would pass through an
    // infeasible membership. Each accepted move strictly improves the
    // score, so this terminates; the pass limit only bounds pathological
    // float behavior.
    for _ in 0..4 * duals.len().max(1) {
        let mut improved = false;
        for &i in &duals {
            member[i] = !member[i];
            let (alloc, score) = evaluate(ues, &member, retrain, r_min, caps);
            if score.better_than(&best) {
                best = score;
                best_alloc = alloc;
                improved = true;
            } else {
                member[i] = !member[i];
            }
        }
        for (a, &i) in duals.iter().enumerate() {
            for &j in &duals[a + 1..] {
                if member[i] == member[j] {
                    continue;
                }
                member.swap(i, j);
                let (alloc, score) = evaluate(ues, &member, retrain, r_min, caps);
                if score.better_than(&best) {
                    best = score;
                    best_alloc = alloc;
                    improved = true;
                } else {
                    member.swap(i, j);
                }
            }
        }
        if !improved {
            break;
        }
    }
    best_alloc
}

fn evaluate(ues: &[OptUe], member: &[bool], retrain: &BTreeSet<UeId>, r_min: f64, caps: RateCaps) -> (RateAllocation, Score) {
    let n_members = member.iter().filter(|&&m| m).count();
    let wifi: Vec<f64> = ues
        .iter()
        .zip(member)
        .map(|(u, &m)| if m { (u.wifi_rate / n_members as f64).min(caps.wifi) } else { 0.0 })
        .collect();

    let mut share = vec![0.0; ues.len()];
    let mut unmet = vec![false; ues.len()];
    let mut budget = 1.0f64;

    // Minimum LTE share each user needs on top of its WiFi projection.
    let need: Vec<Option<f64>> = ues
        .iter()
        .zip(&wifi)
        .map(|(u, &w)| {
            let deficit = r_min - w;
            if deficit <= 0.0 {
                Some(0.0)
            } else if u.capability.has_lte() && u.lte_rate > 0.0 && deficit <= caps.lte {
                Some(deficit / u.lte_rate)
            } else {
                None
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..ues.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = !retrain.contains(&ues[a].id);
        let rb = !retrain.contains(&ues[b].id);
        let ca = need[a].unwrap_or(f64::INFINITY);
        let cb = need[b].unwrap_or(f64::INFINITY);
        ra.cmp(&rb).then(ca.total_cmp(&cb)).then(ues[a].id.cmp(&ues[b].id))
    });
    for &i in &order {
        match need[i] {
            Some(s) if s <= budget + 1e-12 => {
                let s = s.min(budget);
                share[i] = s;
                budget -= s;
            }
            _ => unmet[i] = true,
        }
    }
    let guaranteed = share.clone();

    let mut by_rate: Vec<usize> = (0..ues.len())
        .filter(|&i| ues[i].capability.has_lte() && ues[i].lte_rate > 0.0)
        .collect();
    by_rate.sort_by(|&a, &b| ues[b].lte_rate.total_cmp(&ues[a].lte_rate).then(ues[a].id.cmp(&ues[b].id)));
    for &i in &by_rate {
        if budget <= 0.0 {
            break;
        }
        let room = (caps.lte / ues[i].lte_rate - share[i]).max(0.0);
        let extra = room.min(budget);
        share[i] += extra;
        budget -= extra;
    }

    let mut alloc = RateAllocation::default();
    let mut sum = 0.0;
    let mut retrain_unmet = 0;
    for (i, u) in ues.iter().enumerate() {
        let lte = (share[i] * u.lte_rate).min(caps.lte);
        let projected = lte + wifi[i];
        sum += projected;
        if unmet[i] && retrain.contains(&u.id) {
            retrain_unmet += 1;
        }
        alloc.ues.insert(
            u.id,
            UeAllocation {
                lte_share: share[i],
                guaranteed_share: guaranteed[i],
                wifi_member: member[i],
                projected_rate: projected,
                unsatisfied: unmet[i],
            },
        );
    }
    let score = Score {
        retrain_unmet,
        unmet: unmet.iter().filter(|&&x| x).count(),
        sum,
    };
    (alloc, score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(pairs: &[(u32, f64)]) -> BTreeMap<UeId, f64> {
        pairs.iter().map(|&(u, r)| (UeId(u), r)).collect()
    }

    fn ue(id: u32, capability: Capability, lte_rate: f64, wifi_rate: f64) -> OptUe {
        OptUe { id: UeId(id), capability, lte_rate, wifi_rate }
    }

    const CAPS: RateCaps = RateCaps { lte: 10.0, wifi: 5.0 };

    #[test]
    fn trigger_after_count_max_consecutive_violations() {
        let mut d = DeferralState::new([UeId(0)], 3, 1.0, false);
        assert!(!d.record_window(&rates(&[(0, 0.5)])));
        assert!(!d.record_window(&rates(&[(0, 0.5)])));
        assert!(d.record_window(&rates(&[(0, 0.5)])));
        assert_eq!(d.violations(UeId(0)), 3);
    }

    #[test]
    fn good_window_resets_consecutive_count() {
        let mut d = DeferralState::new([UeId(0)], 3, 1.0, false);
        for r in [0.5, 0.5, 2.0, 0.5, 0.5] {
            assert!(!d.record_window(&rates(&[(0, r)])));
        }
    }

    #[test]
    fn cumulative_counting_ignores_good_windows() {
        let mut d = DeferralState::new([UeId(0)], 3, 1.0, true);
        let mut fired = vec![];
        for r in [0.5, 0.5, 2.0, 0.5] {
            fired.push(d.record_window(&rates(&[(0, r)])));
        }
        assert_eq!(fired, vec![false, false, false, true]);
    }

    #[test]
    fn rate_exactly_at_r_min_is_not_a_violation() {
        let mut d = DeferralState::new([UeId(0)], 1, 1.0, false);
        assert!(!d.record_window(&rates(&[(0, 1.0)])));
    }

    #[test]
    fn all_above_threshold() {
        let mut d = DeferralState::new([UeId(0), UeId(1)], 2, 1.0, false);
        for _ in 0..5 {
            assert!(!d.record_window(&rates(&[(0, 3.0), (1, 1.5)])));
        }
        assert_eq!(d.violations(UeId(0)) + d.violations(UeId(1)), 0);
    }

    #[test]
    fn retrain_set_rules() {
        let mut d = DeferralState::new((0..4).map(UeId), 2, 1.0, false);
        d.record_window(&rates(&[(0, 0.1), (1, 2.0), (2, 2.0), (3, 2.0)]));
        let now = rates(&[(0, 0.1), (1, 2.0), (2, 2.0), (3, 2.0)]);
        let t = d.record_window(&now);
        assert!(t);
        assert_eq!(d.select_retrain_set(&now, t), BTreeSet::from([UeId(0)]));

        let mut d = DeferralState::new((0..4).map(UeId), 2, 1.0, false);
        d.record_window(&rates(&[(0, 0.1), (1, 2.0), (2, 2.0), (3, 2.0)]));
        let now = rates(&[(0, 0.1), (1, 0.2), (2, 0.3), (3, 2.0)]);
        let t = d.record_window(&now);
        let set = d.select_retrain_set(&now, t);
        assert_eq!(set, BTreeSet::from([UeId(0), UeId(1), UeId(2)]));
        d.consume_trigger(&set);
        assert!((0..4).all(|i| d.violations(UeId(i)) == 0));

        assert!(d.select_retrain_set(&now, false).is_empty());
    }

    #[test]
    fn empty_population() {
        assert!(global_optimize(&[], &BTreeSet::new(), 1.0, CAPS).ues.is_empty());
    }

    #[test]
    fn abundant_capacity_meets_r_min_everywhere() {
        let ues = [
            ue(0, Capability::LteOnly, 40.0, 0.0),
            ue(1, Capability::LteOnly, 8.0, 0.0),
            ue(2, Capability::WifiOnly, 0.0, 30.0),
            ue(3, Capability::Dual, 20.0, 12.0),
        ];
        let retrain = BTreeSet::from([UeId(1)]);
        let a = global_optimize(&ues, &retrain, 1.0, CAPS);
        for (ue, x) in &a.ues {
            assert!(x.projected_rate >= 1.0 - 1e-9, "{ue}: {x:?}");
            assert!(!x.unsatisfied);
        }
        assert!(a.total_lte_share() <= 1.0 + 1e-12);
    }

    #[test]
    fn dual_with_better_wifi_joins_wifi() {
        let a = global_optimize(&[ue(0, Capability::Dual, 2.0, 8.0)], &BTreeSet::new(), 1.0, CAPS);
        assert!(a.get(UeId(0)).unwrap().wifi_member);
    }

    #[test]
    fn class_invariants_hold() {
        let ues = [
            ue(0, Capability::LteOnly, 400.0, 0.0),
            ue(1, Capability::WifiOnly, 0.0, 300.0),
            ue(2, Capability::Dual, 200.0, 100.0),
        ];
        let a = global_optimize(&ues, &BTreeSet::new(), 1.0, CAPS);
        assert!(!a.get(UeId(0)).unwrap().wifi_member);
        assert_eq!(a.get(UeId(1)).unwrap().lte_share, 0.0);
        for u in &ues {
            assert!(a.get(u.id).unwrap().projected_rate <= CAPS.class_cap(u.capability) + 1e-9);
        }
    }

    #[test]
    fn infeasible_serves_cheapest_and_flags_rest() {
        // Each needs half the budget or more; only the two cheapest fit.
        let ues = [
            ue(0, Capability::LteOnly, 2.5, 0.0),
            ue(1, Capability::LteOnly, 2.0, 0.0),
            ue(2, Capability::LteOnly, 1.5, 0.0),
        ];
        let a = global_optimize(&ues, &BTreeSet::new(), 1.0, CAPS);
        assert!(!a.get(UeId(0)).unwrap().unsatisfied);
        assert!(!a.get(UeId(1)).unwrap().unsatisfied);
        assert!(a.get(UeId(2)).unwrap().unsatisfied);
    }

    #[test]
    fn retrain_set_is_served_before_cheaper_users() {
        let ues = [ue(0, Capability::LteOnly, 2.5, 0.0), ue(1, Capability::LteOnly, 1.2, 0.0)];
        let a = global_optimize(&ues, &BTreeSet::from([UeId(1)]), 1.0, CAPS);
        assert!(!a.get(UeId(1)).unwrap().unsatisfied);
        assert!(a.get(UeId(0)).unwrap().unsatisfied);
    }

    #[test]
    fn unassociated_wifi_only_user_is_flagged() {
        let a = global_optimize(&[ue(0, Capability::WifiOnly, 0.0, 0.0)], &BTreeSet::new(), 1.0, CAPS);
        let x = a.get(UeId(0)).unwrap();
        assert!(x.unsatisfied && !x.wifi_member);
    }
}
