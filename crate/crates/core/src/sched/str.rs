//! Short-term reservation: a reservation signal sent somewhere in a first
//! window claims a data slot in a second window.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mac::ReservationMap;
use crate::resources::{ResourceId, Subframe, TransportBlock, VehicleId};
use crate::rng::RngStream;
use crate::sched::ledger::ReservationLedger;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrConfig {
    /// Length of each of the two windows in subframes.
    pub window_len_subframes: u32,
}

impl Default for StrConfig {
    fn default() -> Self {
        Self { window_len_subframes: 50 }
    }
}

impl StrConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window_len_subframes == 0 {
            return Err(ConfigError::field("str.window_len_subframes", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrPhase {
    Listening,
    Reserved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrState {
    pub phase: StrPhase,
    pub reservation_slot: ResourceId,
    pub data_slot: Option<ResourceId>,
    /// Inclusive bounds of the reservation window.
    pub window1: (Subframe, Subframe),
    /// Inclusive bounds of the data window.
    pub window2: (Subframe, Subframe),
    pub pending: TransportBlock,
}

/// What a vehicle knows about other vehicles' future use of the channel.
#[derive(Debug, Clone, Copy)]
pub struct Occupancy<'a> {
    pub me: VehicleId,
    pub ledger: &'a ReservationLedger,
    pub map: &'a ReservationMap,
    pub threshold_dbm: f64,
}

impl Occupancy<'_> {
    pub fn blocked(&self, cell: ResourceId) -> bool {
        self.ledger.claimant(cell).is_some_and(|v| v != self.me)
            || self.map.is_reserved(cell.subframe, cell.subchannel, self.threshold_dbm)
    }
}

/// Uniform over unblocked cells of `[start, end]`; uniform over all of them
/// if every cell is blocked. The flag reports the fallback.
fn draw_cell(
    start: Subframe,
    end: Subframe,
    nsub: u32,
    occ: &Occupancy<'_>,
    rng: &mut RngStream,
) -> (ResourceId, bool) {
    let all: Vec<ResourceId> = (start..=end)
        .flat_map(|subframe| (0..nsub).map(move |subchannel| ResourceId { subframe, subchannel }))
        .collect();
    let open: Vec<ResourceId> = all.iter().copied().filter(|&c| !occ.blocked(c)).collect();
    if open.is_empty() {
        (all[rng.index(all.len())], true)
    } else {
        (open[rng.index(open.len())], false)
    }
}

/// Draws the reservation slot for a packet that arrived in `now`.
/// `occ.map` must cover the reservation window.
pub fn str_on_arrival(
    tb: TransportBlock,
    now: Subframe,
    cfg: &StrConfig,
    nsub: u32,
    occ: &Occupancy<'_>,
    rng: &mut RngStream,
) -> StrState {
    let len = u64::from(cfg.window_len_subframes);
    let window1 = (now + 1, now + len);
    let window2 = (now + len + 1, now + 2 * len);
    let (reservation_slot, fallback) = draw_cell(window1.0, window1.1, nsub, occ, rng);
    if fallback {
        log::debug!("vehicle {:?}: reservation window fully reserved at {now}", occ.me);
    }
    StrState { phase: StrPhase::Listening, reservation_slot, data_slot: None, window1, window2, pending: tb }
}

/// Moves a listening vehicle's reservation slot when it has become blocked,
/// drawing again over what is left of the reservation window from `now`.
/// Returns true if the slot moved.
pub fn str_redraw_if_claimed(
    state: &mut StrState,
    now: Subframe,
    nsub: u32,
    occ: &Occupancy<'_>,
    rng: &mut RngStream,
) -> bool {
    if state.phase != StrPhase::Listening || !occ.blocked(state.reservation_slot) {
        return false;
    }
    let start = now.max(state.window1.0);
    if start > state.window1.1 {
        return false;
    }
    let (slot, fallback) = draw_cell(start, state.window1.1, nsub, occ, rng);
    if fallback {
        return false;
    }
    state.reservation_slot = slot;
    true
}

/// Picks the data slot at the reservation subframe. The caller sends the
/// reservation signal carrying it. `occ.map` must cover the data window.
pub fn str_on_reservation_subframe(
    state: &mut StrState,
    nsub: u32,
    occ: &Occupancy<'_>,
    rng: &mut RngStream,
) -> ResourceId {
    assert_eq!(state.phase, StrPhase::Listening, "reservation already sent");
    let (slot, fallback) = draw_cell(state.window2.0, state.window2.1, nsub, occ, rng);
    if fallback {
        log::debug!("vehicle {:?}: data window exhausted, uniform fallback", occ.me);
    }
    state.data_slot = Some(slot);
    state.phase = StrPhase::Reserved;
    slot
}
