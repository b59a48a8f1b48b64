//! Sensing-based semi-persistent scheduling (SB-SPS).

pub mod bound;
pub mod grant;
pub mod selection;
pub mod sensing;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub use bound::{classify_by_phase_sweep, grant_maintenance_bound, maintained_at_phase, MaintenanceClass};
pub use grant::{ArrivalAction, Grant, GrantRecord, GrantState, MacContext, SlotOutcome, SpsMac, SpsStep};
pub use selection::{filter_candidates, select_csr, FilterOutcome, ReservationMap, Selection};
pub use sensing::{DecodedSci, SensingRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsConfig {
    pub rri_ms: u32,
    pub rrc_min: u32,
    pub rrc_max: u32,
    /// Probability of keeping the same resource when the counter expires.
    pub keep_probability: f64,
    pub rsrp_threshold_dbm: f64,
    pub rsrp_step_db: f64,
    pub rssi_keep_fraction: f64,
    pub min_candidate_fraction: f64,
    pub sensing_window_ms: u32,
    pub selection_t1_ms: u32,
    pub rssi_filtering_enabled: bool,
    pub grant_breaking_enabled: bool,
    pub reselect_after_skips: u32,
    /// Exclude candidates in subframes the owner could not sense.
    pub half_duplex_exclusion: bool,
}

impl Default for SpsConfig {
    fn default() -> Self {
        Self {
            rri_ms: 100,
            rrc_min: 5,
            rrc_max: 15,
            keep_probability: 0.0,
            rsrp_threshold_dbm: -126.0,
            rsrp_step_db: 3.0,
            rssi_keep_fraction: 0.2,
            min_candidate_fraction: 0.2,
            sensing_window_ms: 1000,
            selection_t1_ms: 1,
            rssi_filtering_enabled: true,
            grant_breaking_enabled: true,
            reselect_after_skips: 1,
            half_duplex_exclusion: true,
        }
    }
}

impl SpsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rri_ms == 0 {
            return Err(ConfigError::field("sps.rri_ms", "must be positive"));
        }
        if self.rrc_min == 0 || self.rrc_min > self.rrc_max {
            return Err(ConfigError::field("sps.rrc_min", "need 1 <= rrc_min <= rrc_max"));
        }
        if !(0.0..=0.8).contains(&self.keep_probability) {
            return Err(ConfigError::field("sps.keep_probability", "must lie in [0, 0.8]"));
        }
        if !self.rsrp_threshold_dbm.is_finite() {
            return Err(ConfigError::field("sps.rsrp_threshold_dbm", "must be finite"));
        }
        if !(self.rsrp_step_db > 0.0) {
            return Err(ConfigError::field("sps.rsrp_step_db", "must be positive"));
        }
        for (name, v) in [
            ("sps.rssi_keep_fraction", self.rssi_keep_fraction),
            ("sps.min_candidate_fraction", self.min_candidate_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ConfigError::field(name, "must lie in (0, 1]"));
            }
        }
        if self.sensing_window_ms == 0 {
            return Err(ConfigError::field("sps.sensing_window_ms", "must be positive"));
        }
        if !(1..=4).contains(&self.selection_t1_ms) || self.selection_t1_ms > self.rri_ms {
            return Err(ConfigError::field("sps.selection_t1_ms", "must lie in 1..=4 and not exceed the RRI"));
        }
        if self.reselect_after_skips == 0 {
            return Err(ConfigError::field("sps.reselect_after_skips", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of candidates that must survive the RSRP stage.
    pub fn min_candidates(&self, total: usize) -> usize {
        (self.min_candidate_fraction * total as f64).ceil() as usize
    }

    /// Number of candidates kept by the RSSI ranking stage.
    pub fn rssi_keep(&self, total: usize) -> usize {
        (self.rssi_keep_fraction * total as f64).ceil() as usize
    }
}
