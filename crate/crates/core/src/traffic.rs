//! Application-layer packet generators.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mobility::VehicleState;
use crate::resources::Subframe;
use crate::rng::RngStream;

/// Tolerance on the position rule so a vehicle covering exactly the
/// threshold in whole subframes fires despite float accumulation.
const POSITION_EPS_M: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrafficModel {
    Periodic {
        #[serde(default = "default_period")]
        period_ms: u32,
    },
    #[serde(rename = "threegpp")]
    ThreeGpp {
        #[serde(default = "default_base")]
        base_ms: u32,
        #[serde(default = "default_base")]
        exp_mean_ms: u32,
    },
    Etsi {
        #[serde(default = "default_heading")]
        heading_deg: f64,
        #[serde(default = "default_position")]
        position_m: f64,
        #[serde(default = "default_speed")]
        speed_mps: f64,
        #[serde(default = "default_max_gap")]
        max_gap_ms: u32,
    },
    /// Periodic generation; the MAC abandons each grant after one use.
    SingleSlot {
        #[serde(default = "default_period")]
        period_ms: u32,
    },
}

fn default_period() -> u32 {
    100
}
fn default_base() -> u32 {
    50
}
fn default_heading() -> f64 {
    4.0
}
fn default_position() -> f64 {
    4.0
}
fn default_speed() -> f64 {
    0.5
}
fn default_max_gap() -> u32 {
    1000
}

impl TrafficModel {
    pub fn periodic() -> Self {
        Self::Periodic { period_ms: 100 }
    }

    pub fn threegpp() -> Self {
        Self::ThreeGpp { base_ms: 50, exp_mean_ms: 50 }
    }

    pub fn etsi() -> Self {
        Self::Etsi { heading_deg: 4.0, position_m: 4.0, speed_mps: 0.5, max_gap_ms: 1000 }
    }

    pub fn single_slot() -> Self {
        Self::SingleSlot { period_ms: 100 }
    }

    /// Short label used in output files.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Periodic { .. } => "periodic",
            Self::ThreeGpp { .. } => "threegpp",
            Self::Etsi { .. } => "etsi",
            Self::SingleSlot { .. } => "single_slot",
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let bad = |what: &str| Err(ConfigError::field(format!("{field}.{what}"), "must be strictly positive"));
        match *self {
            Self::Periodic { period_ms: 0 } | Self::SingleSlot { period_ms: 0 } => bad("period_ms"),
            Self::ThreeGpp { base_ms: 0, .. } => bad("base_ms"),
            Self::ThreeGpp { exp_mean_ms: 0, .. } => bad("exp_mean_ms"),
            Self::Etsi { heading_deg, .. } if !(heading_deg > 0.0) => bad("heading_deg"),
            Self::Etsi { position_m, .. } if !(position_m > 0.0) => bad("position_m"),
            Self::Etsi { speed_mps, .. } if !(speed_mps > 0.0) => bad("speed_mps"),
            Self::Etsi { max_gap_ms: 0, .. } => bad("max_gap_ms"),
            _ => Ok(()),
        }
    }
}

/// Kinematic snapshot at the last CAM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamSnapshot {
    pub odometer_m: f64,
    pub speed_mps: f64,
    pub heading_deg: f64,
    pub time: Subframe,
}

/// Per-vehicle generator state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    /// Subframe of the next scheduled emission (time-driven models and the
    /// first ETSI CAM).
    pub next_due: Subframe,
    pub last_cam: Option<CamSnapshot>,
    pub last_emit: Option<Subframe>,
}

impl TrafficState {
    /// First emission at a uniform offset in `[start, start + 100)`.
    pub fn new(start: Subframe, rng: &mut RngStream) -> Self {
        let offset = rng.draw_uniform_int(0, 99) as u64;
        Self { next_due: start + offset, last_cam: None, last_emit: None }
    }
}

fn snapshot(v: &VehicleState, now: Subframe) -> CamSnapshot {
    CamSnapshot { odometer_m: v.odometer_m, speed_mps: v.speed_mps, heading_deg: v.heading_deg, time: now }
}

fn heading_change(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Whether the vehicle generates a packet in `now`.
///
/// The 3GPP gap is `base + floor(Exp(mean))` whole subframes, resampled
/// per packet.
pub fn next_packet(
    model: &TrafficModel,
    state: &mut TrafficState,
    v: &VehicleState,
    now: Subframe,
    rng: &mut RngStream,
) -> bool {
    let emit = match *model {
        TrafficModel::Periodic { period_ms } | TrafficModel::SingleSlot { period_ms } => {
            let due = now >= state.next_due;
            if due {
                state.next_due = now + u64::from(period_ms);
            }
            due
        }
        TrafficModel::ThreeGpp { base_ms, exp_mean_ms } => {
            let due = now >= state.next_due;
            if due {
                let exp = Exp::new(1.0 / f64::from(exp_mean_ms)).expect("positive rate");
                let extra: f64 = exp.sample(rng.raw());
                state.next_due = now + u64::from(base_ms) + extra.floor() as u64;
            }
            due
        }
        TrafficModel::Etsi { heading_deg, position_m, speed_mps, max_gap_ms } => match state.last_cam {
            None => now >= state.next_due,
            Some(last) => {
                v.odometer_m - last.odometer_m >= position_m - POSITION_EPS_M
                    || (v.speed_mps - last.speed_mps).abs() > speed_mps
                    || heading_change(v.heading_deg, last.heading_deg) > heading_deg
                    || now - last.time >= u64::from(max_gap_ms)
            }
        },
    };
    if emit {
        state.last_emit = Some(now);
        state.last_cam = Some(snapshot(v, now));
    }
    emit
}
