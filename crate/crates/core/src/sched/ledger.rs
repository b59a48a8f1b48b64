use std::collections::BTreeMap;

use crate::resources::{Csr, ResourceId, Subframe, VehicleId};

/// Future data slots claimed by decoded short-term reservation signals.
/// The first claim decoded for a cell wins.
#[derive(Debug, Clone, Default)]
pub struct ReservationLedger {
    claims: BTreeMap<ResourceId, VehicleId>,
}

impl ReservationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a claim; returns false if the cell was already claimed.
    pub fn insert(&mut self, cell: ResourceId, by: VehicleId) -> bool {
        if self.claims.contains_key(&cell) {
            return false;
        }
        self.claims.insert(cell, by);
        true
    }

    pub fn claim_csr(&mut self, csr: &Csr, by: VehicleId) {
        for cell in csr.cells() {
            self.insert(cell, by);
        }
    }

    /// Drops claims on subframes before `now`.
    pub fn expire(&mut self, now: Subframe) {
        let keep = self.claims.split_off(&ResourceId { subframe: now, subchannel: 0 });
        self.claims = keep;
    }

    pub fn claimant(&self, cell: ResourceId) -> Option<VehicleId> {
        self.claims.get(&cell).copied()
    }

    /// True if any cell of `csr` is claimed by someone other than `me`.
    pub fn claims_csr(&self, csr: &Csr, me: VehicleId) -> bool {
        csr.cells().any(|c| self.claimant(c).is_some_and(|v| v != me))
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_claim_wins_and_expires() {
        let mut l = ReservationLedger::new();
        let cell = ResourceId { subframe: 10, subchannel: 1 };
        assert!(l.insert(cell, VehicleId(1)));
        assert!(!l.insert(cell, VehicleId(2)));
        assert_eq!(l.claimant(cell), Some(VehicleId(1)));
        assert!(l.claims_csr(&Csr::new(10, 0, 2), VehicleId(2)));
        assert!(!l.claims_csr(&Csr::new(10, 1, 1), VehicleId(1)));
        l.expire(10);
        assert_eq!(l.len(), 1);
        l.expire(11);
        assert!(l.is_empty());
    }
}
