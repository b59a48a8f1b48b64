//! Per-vehicle sensing history over the last `window_ms` subframes.

use crate::resources::{Csr, Subframe, VehicleId};

/// An SCI decoded during sensing, with the PSSCH-RSRP of its TB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedSci {
    pub sender: VehicleId,
    pub rri_ms: u32,
    /// Resource the SCI was received on (and announces for reuse).
    pub resource: Csr,
    pub rsrp_dbm: f64,
}

#[derive(Debug, Clone)]
struct Slot {
    subframe: Option<Subframe>,
    own_tx: bool,
    /// Linear S-RSSI per subchannel; NaN when nothing was measured.
    rssi_mw: Vec<f64>,
    scis: Vec<DecodedSci>,
}

impl Slot {
    fn reset(&mut self, subframe: Subframe) {
        self.subframe = Some(subframe);
        self.own_tx = false;
        self.rssi_mw.iter_mut().for_each(|v| *v = f64::NAN);
        self.scis.clear();
    }
}

/// Ring buffer indexed by `subframe % window_ms`. A slot is evicted as soon
/// as a newer subframe maps onto it.
#[derive(Debug, Clone)]
pub struct SensingRecord {
    window_ms: u32,
    num_subchannels: u32,
    slots: Vec<Slot>,
}

/// Read-only view of one sensed subframe.
#[derive(Debug, Clone, Copy)]
pub struct SlotView<'a> {
    pub subframe: Subframe,
    pub own_tx: bool,
    rssi_mw: &'a [f64],
    pub scis: &'a [DecodedSci],
}

impl SlotView<'_> {
    pub fn rssi_mw(&self, subchannel: u32) -> Option<f64> {
        let v = self.rssi_mw[subchannel as usize];
        (!v.is_nan()).then_some(v)
    }
}

impl SensingRecord {
    pub fn new(window_ms: u32, num_subchannels: u32) -> Self {
        assert!(window_ms > 0, "sensing window must be positive");
        let slot = Slot {
            subframe: None,
            own_tx: false,
            rssi_mw: vec![f64::NAN; num_subchannels as usize],
            scis: Vec::new(),
        };
        Self { window_ms, num_subchannels, slots: vec![slot; window_ms as usize] }
    }

    pub fn window_ms(&self) -> u32 {
        self.window_ms
    }

    pub fn num_subchannels(&self) -> u32 {
        self.num_subchannels
    }

    fn slot_mut(&mut self, subframe: Subframe) -> &mut Slot {
        let idx = (subframe % u64::from(self.window_ms)) as usize;
        let slot = &mut self.slots[idx];
        if slot.subframe != Some(subframe) {
            slot.reset(subframe);
        }
        slot
    }

    /// Marks a subframe in which the owner transmitted; anything sensed in
    /// it is discarded.
    pub fn record_own_tx(&mut self, subframe: Subframe) {
        let slot = self.slot_mut(subframe);
        slot.own_tx = true;
        slot.rssi_mw.iter_mut().for_each(|v| *v = f64::NAN);
        slot.scis.clear();
    }

    pub fn record_rssi(&mut self, subframe: Subframe, subchannel: u32, rssi_mw: f64) {
        let slot = self.slot_mut(subframe);
        if !slot.own_tx {
            slot.rssi_mw[subchannel as usize] = rssi_mw;
        }
    }

    pub fn record_sci(&mut self, subframe: Subframe, sci: DecodedSci) {
        let slot = self.slot_mut(subframe);
        if !slot.own_tx {
            slot.scis.push(sci);
        }
    }

    /// Slots sensed in `[now - window_ms, now - 1]`, oldest first.
    pub fn window(&self, now: Subframe) -> impl Iterator<Item = SlotView<'_>> + '_ {
        let lo = now.saturating_sub(u64::from(self.window_ms));
        (lo..now).filter_map(move |sf| {
            let slot = &self.slots[(sf % u64::from(self.window_ms)) as usize];
            (slot.subframe == Some(sf)).then(|| SlotView {
                subframe: sf,
                own_tx: slot.own_tx,
                rssi_mw: &slot.rssi_mw,
                scis: &slot.scis,
            })
        })
    }

    pub fn slot(&self, subframe: Subframe) -> Option<SlotView<'_>> {
        let slot = &self.slots[(subframe % u64::from(self.window_ms)) as usize];
        (slot.subframe == Some(subframe)).then(|| SlotView {
            subframe,
            own_tx: slot.own_tx,
            rssi_mw: &slot.rssi_mw,
            scis: &slot.scis,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sci(sender: u32, sf: Subframe) -> DecodedSci {
        DecodedSci { sender: VehicleId(sender), rri_ms: 100, resource: Csr::new(sf, 0, 1), rsrp_dbm: -100.0 }
    }

    #[test]
    fn eviction_after_window() {
        let mut r = SensingRecord::new(10, 3);
        r.record_sci(5, sci(1, 5));
        r.record_rssi(5, 2, 1e-9);
        assert_eq!(r.window(6).count(), 1);
        assert_eq!(r.window(15).count(), 1);
        assert_eq!(r.window(16).count(), 0);
        r.record_rssi(15, 0, 1e-9);
        let s = r.slot(15).unwrap();
        assert!(s.scis.is_empty());
        assert_eq!(s.rssi_mw(2), None);
        assert!(r.slot(5).is_none());
    }

    #[test]
    fn own_tx_blinds_the_subframe() {
        let mut r = SensingRecord::new(100, 2);
        r.record_sci(7, sci(1, 7));
        r.record_own_tx(7);
        r.record_sci(7, sci(2, 7));
        r.record_rssi(7, 0, 1.0);
        let s = r.slot(7).unwrap();
        assert!(s.own_tx);
        assert!(s.scis.is_empty());
        assert_eq!(s.rssi_mw(0), None);
    }
}
