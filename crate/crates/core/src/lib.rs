//! Slotted-time simulator of LTE-U and WiFi coexistence in a single cell.
//!
//! The LTE-U downlink is scheduled per TTI with a proportional-fair metric,
//! WiFi stations contend with CSMA/CA binary exponential backoff, and the
//! joint mode couples both through a deferral-based scheduler that only
//! re-optimizes the rate allocation once users have stayed below the minimum
//! rate for `count_max` windows.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod joint;
pub mod lte_pf;
pub mod metrics;
pub mod output;
pub mod wifi_dcf;

pub use config::SimConfig;
pub use engine::{run, Mode, SimReport};
pub use error::{Error, Result};
pub use metrics::SchedulerStats;

use serde::{Deserialize, Serialize};

/// Identifier of a user equipment. Ids are dense, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UeId(pub u32);

impl UeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for UeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Radio interfaces a user can use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Capability {
    LteOnly,
    WifiOnly,
    Dual,
}

impl Capability {
    pub fn has_lte(self) -> bool {
        matches!(self, Capability::LteOnly | Capability::Dual)
    }

    pub fn has_wifi(self) -> bool {
        matches!(self, Capability::WifiOnly | Capability::Dual)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::LteOnly => "lte_only",
            Capability::WifiOnly => "wifi_only",
            Capability::Dual => "dual",
        }
    }
}
