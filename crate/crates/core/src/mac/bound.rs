//! When does an active grant survive a given packet inter-arrival time?
//!
//! With reservation interval `n`, an inter-arrival of at most `n` can never
//! leave a reserved occurrence empty. Up to `2n - 2` the grant survives only
//! if the gap spans a single occurrence, which depends on where the first
//! packet lands relative to the reservation grid. Beyond that the grant
//! breaks.

use crate::mac::grant::{Grant, MacContext, SpsMac};
use crate::mac::sensing::SensingRecord;
use crate::mac::SpsConfig;
use crate::resources::{ChannelLayout, Csr, TransportBlock, VehicleId};
use crate::rng::{RngStream, StreamId, MAC};
use crate::sched::ledger::ReservationLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaintenanceClass {
    Maintained,
    Conditional,
    Broken,
}

/// Closed-form classification for the default single-skip break policy.
pub fn grant_maintenance_bound(inter_arrival: u64, rri: u64) -> MaintenanceClass {
    if inter_arrival <= rri {
        MaintenanceClass::Maintained
    } else if inter_arrival + 2 <= 2 * rri {
        MaintenanceClass::Conditional
    } else {
        MaintenanceClass::Broken
    }
}

/// Runs the real MAC for one arrival phase: the grant's occurrence at `s0`
/// carries an earlier packet, packet A arrives at `s0 + phase`, packet X
/// arrives `inter_arrival` later. Returns whether X is sent on the same
/// grant with no occurrence left empty.
pub fn maintained_at_phase(inter_arrival: u64, rri: u32, phase: u64) -> bool {
    let cfg = SpsConfig { rri_ms: rri, ..SpsConfig::default() };
    let layout = ChannelLayout::default();
    let record = SensingRecord::new(cfg.sensing_window_ms, layout.num_subchannels);
    let ledger = ReservationLedger::new();
    let ctx = MacContext { record: &record, layout: &layout, ledger: &ledger };
    let mut rng = RngStream::new(0, StreamId::global(MAC));
    let me = VehicleId(0);
    let tb = |origin| TransportBlock { sender: me, payload_bytes: 190, rb_count: 16, origin_time: origin };

    let s0 = 10 * u64::from(rri);
    let mut mac = SpsMac::new(me, cfg, 1);
    let grant = Grant::new(me, Csr::new(s0, 0, 1), rri, 1_000, 0);
    mac.install(grant, Some(tb(s0 - 1)));

    let a_at = s0 + phase;
    let x_at = a_at + inter_arrival;
    let horizon = x_at + 2 * u64::from(rri);
    for t in s0..=horizon {
        let step = mac.on_subframe(t, &ctx, &mut rng);
        if step.finished.iter().any(|g| g.broken) {
            return false;
        }
        if let Some((_, sent)) = step.transmit {
            if sent.origin_time == x_at {
                return true;
            }
        }
        if t == a_at {
            mac.on_packet_arrival(tb(a_at), t, &ctx, &mut rng);
        }
        if t == x_at {
            mac.on_packet_arrival(tb(x_at), t, &ctx, &mut rng);
        }
    }
    false
}

/// Exhaustive sweep over every arrival phase `0..rri`.
pub fn classify_by_phase_sweep(inter_arrival: u64, rri: u32) -> MaintenanceClass {
    let kept = (0..u64::from(rri)).filter(|&p| maintained_at_phase(inter_arrival, rri, p)).count();
    if kept == rri as usize {
        MaintenanceClass::Maintained
    } else if kept == 0 {
        MaintenanceClass::Broken
    } else {
        MaintenanceClass::Conditional
    }
}
