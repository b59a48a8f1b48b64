//! Grant lifecycle and the per-vehicle SB-SPS MAC.

use crate::mac::selection::select_csr;
use crate::mac::sensing::SensingRecord;
use crate::mac::SpsConfig;
use crate::resources::{ChannelLayout, Csr, Subframe, TransportBlock, VehicleId};
use crate::rng::RngStream;
use crate::sched::ledger::ReservationLedger;
use crate::sched::sps_coexistence_defer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrantState {
    Active,
    Broken,
    Completed,
}

/// Usage summary of a grant once it is broken or completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrantRecord {
    pub owner: VehicleId,
    /// Reselection counter drawn at creation.
    pub length: u32,
    pub used: u32,
    pub broken: bool,
    pub ended_at: Subframe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grant {
    pub owner: VehicleId,
    /// Next reserved occurrence.
    pub csr: Csr,
    pub rri_ms: u32,
    pub rrc_remaining: u32,
    pub allocated: u32,
    pub used: u32,
    pub created_at: Subframe,
    pub state: GrantState,
    pub consecutive_skips: u32,
    /// An SCI has gone out on this resource.
    pub announced: bool,
    /// Single-slot usage: abandon the grant after its first transmission.
    pub break_after_first_use: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotOutcome {
    pub transmitted: bool,
    pub finished: Option<GrantRecord>,
    /// Reserved occurrences that will carry no TB.
    pub unused: Vec<Csr>,
}

impl Grant {
    pub fn new(owner: VehicleId, csr: Csr, rri_ms: u32, rrc: u32, now: Subframe) -> Self {
        Self {
            owner,
            csr,
            rri_ms,
            rrc_remaining: rrc,
            allocated: rrc,
            used: 0,
            created_at: now,
            state: GrantState::Active,
            consecutive_skips: 0,
            announced: false,
            break_after_first_use: false,
        }
    }

    fn record(&self, broken: bool, at: Subframe) -> GrantRecord {
        GrantRecord { owner: self.owner, length: self.allocated, used: self.used, broken, ended_at: at }
    }

    /// The `count` occurrences starting `from` periods after the current one.
    fn occurrences(&self, from: u32, count: u32) -> Vec<Csr> {
        let rri = u64::from(self.rri_ms);
        (from..from + count).map(|k| self.csr.at(self.csr.subframe() + u64::from(k) * rri)).collect()
    }

    /// Advances the grant through its current reserved occurrence.
    pub fn on_reserved_slot(&mut self, has_tb: bool, cfg: &SpsConfig, rng: &mut RngStream) -> SlotOutcome {
        assert_eq!(self.state, GrantState::Active, "slot on an inactive grant");
        let now = self.csr.subframe();
        let mut out = SlotOutcome::default();
        if has_tb {
            out.transmitted = true;
            self.used += 1;
            self.rrc_remaining -= 1;
            self.consecutive_skips = 0;
            self.announced = true;
            if self.break_after_first_use && self.rrc_remaining > 0 {
                out.unused = self.occurrences(1, self.rrc_remaining);
                self.state = GrantState::Broken;
                out.finished = Some(self.record(true, now));
            } else if self.rrc_remaining == 0 {
                out.finished = Some(self.record(false, now));
                if cfg.keep_probability > 0.0 && rng.unit() < cfg.keep_probability {
                    let rrc = rng.draw_uniform_int(i64::from(cfg.rrc_min), i64::from(cfg.rrc_max)) as u32;
                    self.allocated = rrc;
                    self.rrc_remaining = rrc;
                    self.used = 0;
                    self.created_at = now;
                } else {
                    self.state = GrantState::Completed;
                }
            }
        } else {
            self.consecutive_skips += 1;
            if cfg.grant_breaking_enabled && self.consecutive_skips >= cfg.reselect_after_skips {
                out.unused = self.occurrences(0, self.rrc_remaining);
                self.state = GrantState::Broken;
                out.finished = Some(self.record(true, now));
            } else {
                out.unused.push(self.csr);
                self.rrc_remaining -= 1;
                if self.rrc_remaining == 0 {
                    self.state = GrantState::Completed;
                    out.finished = Some(self.record(false, now));
                }
            }
        }
        if self.state == GrantState::Active {
            self.csr = self.csr.at(now + u64::from(self.rri_ms));
        }
        out
    }
}

/// What the MAC needs to see of the vehicle's surroundings.
#[derive(Debug, Clone, Copy)]
pub struct MacContext<'a> {
    pub record: &'a SensingRecord,
    pub layout: &'a ChannelLayout,
    pub ledger: &'a ReservationLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalAction {
    /// Queued for the next occurrence of the active grant.
    Queued,
    /// Replaced an older TB still waiting for its slot.
    Replaced,
    NewGrant(Csr),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpsStep {
    pub transmit: Option<(Csr, TransportBlock)>,
    pub finished: Vec<GrantRecord>,
    pub unused: Vec<Csr>,
}

/// SB-SPS MAC of one vehicle.
#[derive(Debug, Clone)]
pub struct SpsMac {
    pub id: VehicleId,
    pub cfg: SpsConfig,
    pub width: u32,
    pub single_slot: bool,
    /// Defer the first use of a fresh selection and relinquish it if a
    /// short-term reservation claims it meanwhile.
    pub coexistence: bool,
    grant: Option<Grant>,
    queued: Option<TransportBlock>,
    survivors: Vec<Csr>,
    pub dropped: u64,
    pub selection_fallbacks: u64,
    pub relinquished: u64,
}

impl SpsMac {
    pub fn new(id: VehicleId, cfg: SpsConfig, width: u32) -> Self {
        Self {
            id,
            cfg,
            width,
            single_slot: false,
            coexistence: false,
            grant: None,
            queued: None,
            survivors: Vec::new(),
            dropped: 0,
            selection_fallbacks: 0,
            relinquished: 0,
        }
    }

    pub fn grant(&self) -> Option<&Grant> {
        self.grant.as_ref()
    }

    pub fn queued(&self) -> Option<&TransportBlock> {
        self.queued.as_ref()
    }

    /// Installs an active grant and optionally a waiting TB.
    pub fn install(&mut self, grant: Grant, queued: Option<TransportBlock>) {
        self.grant = Some(grant);
        self.queued = queued;
    }

    /// Serves the reserved occurrence in `now`, if any. TBs that arrive in
    /// `now` are only accepted afterwards, so they never ride this slot.
    pub fn on_subframe(&mut self, now: Subframe, ctx: &MacContext<'_>, rng: &mut RngStream) -> SpsStep {
        let mut step = SpsStep::default();
        let Some(grant) = self.grant.as_mut() else {
            return step;
        };
        if grant.csr.subframe() != now {
            return step;
        }
        let has_tb = self.queued.is_some_and(|tb| tb.origin_time < now);

        if has_tb && self.coexistence && !grant.announced {
            let (csr, moved) = sps_coexistence_defer(&self.survivors, grant.csr, ctx.ledger, self.id, now, rng);
            if moved {
                grant.csr = csr;
                self.relinquished += 1;
                if csr.subframe() > now {
                    return step;
                }
            }
        }

        let slot = grant.csr;
        let out = grant.on_reserved_slot(has_tb, &self.cfg, rng);
        if out.transmitted {
            let tb = self.queued.take().expect("eligible TB");
            step.transmit = Some((slot, tb));
        }
        step.unused = out.unused;
        step.finished.extend(out.finished);
        if grant.state != GrantState::Active {
            self.grant = None;
            self.survivors.clear();
        }
        step
    }

    pub fn on_packet_arrival(
        &mut self,
        tb: TransportBlock,
        now: Subframe,
        ctx: &MacContext<'_>,
        rng: &mut RngStream,
    ) -> ArrivalAction {
        let replaced = self.queued.replace(tb).is_some();
        if replaced {
            self.dropped += 1;
        }
        if self.grant.is_some() {
            return if replaced { ArrivalAction::Replaced } else { ArrivalAction::Queued };
        }
        let Some(sel) = select_csr(ctx.record, ctx.layout, &self.cfg, now, self.width, rng) else {
            log::warn!("vehicle {:?}: no candidate resources of width {}", self.id, self.width);
            self.queued = None;
            self.dropped += 1;
            return ArrivalAction::Queued;
        };
        if sel.fallback {
            self.selection_fallbacks += 1;
        }
        let rrc = rng.draw_uniform_int(i64::from(self.cfg.rrc_min), i64::from(self.cfg.rrc_max)) as u32;
        let mut grant = Grant::new(self.id, sel.csr, self.cfg.rri_ms, rrc, now);
        grant.break_after_first_use = self.single_slot;
        self.grant = Some(grant);
        if self.coexistence {
            self.survivors = sel.survivors;
        }
        ArrivalAction::NewGrant(sel.csr)
    }
}
