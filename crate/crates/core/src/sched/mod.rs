//! Per-packet scheduling mechanisms for aperiodic traffic, plus the
//! adaptation that lets SB-SPS coexist with short-term reservations.

pub mod counter;
pub mod ledger;
pub mod str;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::resources::{Csr, ResourceId, Subframe, VehicleId};
use crate::rng::RngStream;

pub use counter::{counter_step, CounterConfig, CounterState};
pub use ledger::ReservationLedger;
pub use str::{str_on_arrival, str_on_reservation_subframe, str_redraw_if_claimed, Occupancy, StrConfig, StrPhase, StrState};

/// Uniform over every `(subframe, subchannel)` in `(now, now + horizon]`.
pub fn random_schedule(now: Subframe, horizon: u32, num_subchannels: u32, rng: &mut RngStream) -> ResourceId {
    let subframe = now + rng.draw_uniform_int(1, i64::from(horizon)) as u64;
    let subchannel = rng.index(num_subchannels as usize) as u32;
    ResourceId { subframe, subchannel }
}

/// Relinquishes `chosen` when a decoded reservation claims it.
///
/// Returns the resource to use and whether it changed. Alternatives are the
/// survivors at or after `now` that no other vehicle has claimed.
pub fn sps_coexistence_defer(
    survivors: &[Csr],
    chosen: Csr,
    ledger: &ReservationLedger,
    me: VehicleId,
    now: Subframe,
    rng: &mut RngStream,
) -> (Csr, bool) {
    if !ledger.claims_csr(&chosen, me) {
        return (chosen, false);
    }
    let alternatives: Vec<Csr> = survivors
        .iter()
        .copied()
        .filter(|c| c.subframe() >= now && *c != chosen && !ledger.claims_csr(c, me))
        .collect();
    if alternatives.is_empty() {
        log::debug!("vehicle {me:?}: every survivor claimed at {now}, keeping {chosen:?}");
        return (chosen, false);
    }
    (alternatives[rng.index(alternatives.len())], true)
}

/// Which scheduler serves a traffic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchedulerVariant {
    Sbsps,
    SbspsNoRssi,
    /// SB-SPS with a shortened sensing window in ms.
    SbspsWindow(u32),
    SbspsNoBreak,
    Random,
    Counter,
    Str,
}

impl SchedulerVariant {
    pub fn is_sbsps(self) -> bool {
        matches!(self, Self::Sbsps | Self::SbspsNoRssi | Self::SbspsWindow(_) | Self::SbspsNoBreak)
    }
}

impl std::fmt::Display for SchedulerVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Sbsps => f.write_str("sbsps"),
            Self::SbspsNoRssi => f.write_str("sbsps-no-rssi"),
            Self::SbspsWindow(w) => write!(f, "sbsps-sw{w}"),
            Self::SbspsNoBreak => f.write_str("sbsps-no-break"),
            Self::Random => f.write_str("random"),
            Self::Counter => f.write_str("counter"),
            Self::Str => f.write_str("str"),
        }
    }
}

impl std::str::FromStr for SchedulerVariant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "sbsps" => Self::Sbsps,
            "sbsps-no-rssi" => Self::SbspsNoRssi,
            "sbsps-sw100" => Self::SbspsWindow(100),
            "sbsps-sw200" => Self::SbspsWindow(200),
            "sbsps-sw500" => Self::SbspsWindow(500),
            "sbsps-no-break" => Self::SbspsNoBreak,
            "random" => Self::Random,
            "counter" => Self::Counter,
            "str" => Self::Str,
            other => return Err(ConfigError::field("scheduler", format!("unknown variant `{other}`"))),
        })
    }
}

impl TryFrom<String> for SchedulerVariant {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SchedulerVariant> for String {
    fn from(v: SchedulerVariant) -> Self {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamId, MAC};

    #[test]
    fn random_schedule_is_uniform_over_the_grid() {
        let mut rng = RngStream::new(5, StreamId::global(MAC));
        let n = 100_000;
        let mut counts = vec![0u32; 300];
        for _ in 0..n {
            let r = random_schedule(1000, 100, 3, &mut rng);
            assert!(r.subframe > 1000 && r.subframe <= 1100);
            counts[((r.subframe - 1001) * 3 + u64::from(r.subchannel)) as usize] += 1;
        }
        let expected = f64::from(n) / 300.0;
        let chi2: f64 = counts.iter().map(|&c| (f64::from(c) - expected).powi(2) / expected).sum();
        // 299 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 383.0, "chi2 {chi2}");
        let sigma = (expected * (1.0 - 1.0 / 300.0)).sqrt();
        let worst = counts.iter().map(|&c| (f64::from(c) - expected).abs()).fold(0.0, f64::max);
        assert!(worst < 4.5 * sigma, "worst deviation {worst}");
    }

    #[test]
    fn defer_keeps_unclaimed_choice() {
        let mut rng = RngStream::new(5, StreamId::global(MAC));
        let survivors: Vec<Csr> = (0..60).map(|i| Csr::new(101 + i / 3, (i % 3) as u32, 1)).collect();
        let ledger = ReservationLedger::new();
        assert_eq!(sps_coexistence_defer(&survivors, survivors[7], &ledger, VehicleId(1), 100, &mut rng), (survivors[7], false));
    }

    #[test]
    fn defer_moves_off_claimed_choice() {
        let mut rng = RngStream::new(5, StreamId::global(MAC));
        let survivors: Vec<Csr> = (0..60).map(|i| Csr::new(101 + i / 3, (i % 3) as u32, 1)).collect();
        let mut ledger = ReservationLedger::new();
        ledger.claim_csr(&survivors[7], VehicleId(2));
        for _ in 0..200 {
            let (c, moved) = sps_coexistence_defer(&survivors, survivors[7], &ledger, VehicleId(1), 100, &mut rng);
            assert!(moved);
            assert_ne!(c, survivors[7]);
            assert!(!ledger.claims_csr(&c, VehicleId(1)));
        }
    }

    #[test]
    fn defer_keeps_choice_when_all_claimed() {
        let mut rng = RngStream::new(5, StreamId::global(MAC));
        let survivors = vec![Csr::new(101, 0, 1), Csr::new(102, 1, 1)];
        let mut ledger = ReservationLedger::new();
        for c in &survivors {
            ledger.claim_csr(c, VehicleId(2));
        }
        assert_eq!(sps_coexistence_defer(&survivors, survivors[0], &ledger, VehicleId(1), 100, &mut rng), (survivors[0], false));
    }

    #[test]
    fn variant_names_round_trip() {
        for s in ["sbsps", "sbsps-no-rssi", "sbsps-sw100", "sbsps-sw200", "sbsps-sw500", "sbsps-no-break", "random", "counter", "str"] {
            let v: SchedulerVariant = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        let err = "sbsps-sw300".parse::<SchedulerVariant>().unwrap_err();
        assert_eq!(err.field, "scheduler");
    }
}
