//! Proportional-fair LTE downlink scheduling.
//!
//! Every resource block of a TTI goes to the user with the largest ratio of
//! instantaneous rate to EWMA average throughput. Rates are flat across the
//! band, so the per-RB argmax can be computed by ranking users once per TTI
//! and filling RBs in rank order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::UeId;

/// `inst_rate / avg_throughput`.
pub fn pf_metric(inst_rate: f64, avg_throughput: f64) -> Result<f64> {
    if !(avg_throughput > 0.0) {
        return Err(Error::Domain(format!(
            "average throughput must be > 0, got {avg_throughput}"
        )));
    }
    Ok(inst_rate / avg_throughput)
}

/// EWMA-tracked average throughput for every LTE-capable user.
#[derive(Debug, Clone, PartialEq)]
pub struct PfState {
    avg: BTreeMap<UeId, f64>,
    tau: f64,
    epsilon: f64,
}

impl PfState {
    pub fn new(ues: impl IntoIterator<Item = UeId>, tau: f64, epsilon: f64) -> Result<Self> {
        if !(tau >= 1.0) {
            return Err(Error::Domain(format!("tau must be >= 1, got {tau}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self {
            avg: ues.into_iter().map(|ue| (ue, epsilon)).collect(),
            tau,
            epsilon,
        })
    }

    pub fn avg(&self, ue: UeId) -> Option<f64> {
        self.avg.get(&ue).copied()
    }

    pub fn set_avg(&mut self, ue: UeId, value: f64) {
        if let Some(a) = self.avg.get_mut(&ue) {
            *a = value.max(self.epsilon);
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn tracked(&self) -> impl Iterator<Item = (UeId, f64)> + '_ {
        self.avg.iter().map(|(&ue, &a)| (ue, a))
    }

    /// One EWMA step. Users missing from `achieved` are treated as having
    /// received nothing, so their average decays toward the floor.
    pub fn update_average(&mut self, achieved: &BTreeMap<UeId, f64>) {
        let w = 1.0 / self.tau;
        for (ue, avg) in self.avg.iter_mut() {
            let r = achieved.get(ue).copied().unwrap_or(0.0).max(0.0);
            *avg = ((1.0 - w) * *avg + w * r).max(self.epsilon);
        }
    }
}

/// A user eligible for LTE resources in one TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub ue: UeId,
    /// Bits/s the user would receive on a single RB.
    pub rate_per_rb: f64,
    /// Upper bound on bits the user may receive this TTI.
    pub max_bits: Option<f64>,
    /// RBs handed out before the PF pass, e.g. to honor a rate guarantee.
    pub reserved_rbs: u32,
}

impl Candidate {
    pub fn new(ue: UeId, rate_per_rb: f64) -> Self {
        Self {
            ue,
            rate_per_rb,
            max_bits: None,
            reserved_rbs: 0,
        }
    }

    /// Maximum number of RBs the user can usefully take this TTI.
    fn max_rbs(&self, tti: f64) -> u32 {
        match self.max_bits {
            None => u32::MAX,
            Some(bits) => {
                let per_rb = self.rate_per_rb * tti;
                if per_rb <= 0.0 {
                    u32::MAX
                } else {
                    (bits / per_rb).ceil().min(u32::MAX as f64) as u32
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TtiAllocation {
    /// `assignment[rb]` is the user holding RB `rb`, or `None` if idle.
    pub assignment: Vec<Option<UeId>>,
    /// Bits delivered this TTI per user that won at least one RB.
    pub achieved: BTreeMap<UeId, f64>,
}

impl TtiAllocation {
    pub fn rbs_of(&self, ue: UeId) -> usize {
        self.assignment.iter().filter(|a| **a == Some(ue)).count()
    }
}

/// Assigns `num_rbs` resource blocks for one TTI of `tti` seconds.
///
/// Reserved RBs are placed first, lowest RB index first, in candidate
/// order. Each remaining RB goes to the user with the highest PF metric
/// among users that have not yet hit their bit budget; ties go to the lowest
/// id. Candidates must be tracked by `state`.
pub fn allocate_tti(
    candidates: &[Candidate],
    state: &PfState,
    num_rbs: usize,
    tti: f64,
) -> Result<TtiAllocation> {
    let mut assignment = vec![None; num_rbs];
    let mut won = vec![0u32; candidates.len()];
    let mut next_rb = 0usize;

    for (i, c) in candidates.iter().enumerate() {
        let take = (c.reserved_rbs as usize).min(num_rbs - next_rb);
        for slot in &mut assignment[next_rb..next_rb + take] {
            *slot = Some(c.ue);
        }
        next_rb += take;
        won[i] += take as u32;
    }

    let mut ranked = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        let avg = state
            .avg(c.ue)
            .ok_or_else(|| Error::Domain(format!("UE {} is not tracked by the PF state", c.ue)))?;
        ranked.push((pf_metric(c.rate_per_rb, avg)?, c.ue, i));
    }
    // Metric descending, then id ascending.
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    for &(_, ue, i) in &ranked {
        if next_rb == num_rbs {
            break;
        }
        let room = candidates[i].max_rbs(tti).saturating_sub(won[i]) as usize;
        let take = room.min(num_rbs - next_rb);
        for slot in &mut assignment[next_rb..next_rb + take] {
            *slot = Some(ue);
        }
        next_rb += take;
        won[i] += take as u32;
    }

    let mut achieved = BTreeMap::new();
    for (c, &n) in candidates.iter().zip(&won) {
        if n == 0 {
            continue;
        }
        let mut bits = n as f64 * c.rate_per_rb * tti;
        if let Some(cap) = c.max_bits {
            bits = bits.min(cap);
        }
        *achieved.entry(c.ue).or_insert(0.0) += bits;
    }
    Ok(TtiAllocation { assignment, achieved })
}
