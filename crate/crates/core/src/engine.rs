//! The subframe loop.
//!
//! Every call to [`Simulation::advance`] runs one 1 ms subframe through six
//! phases in a fixed order: mobility, traffic, MAC, PHY transmission,
//! reception and sensing, metrics. MAC decisions only read sensing state
//! written in earlier subframes.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::ConfigError;
use crate::mac::{ArrivalAction, DecodedSci, GrantRecord, MacContext, ReservationMap, SensingRecord, SpsConfig, SpsMac};
use crate::metrics::output::ReceptionRow;
use crate::metrics::{
    grant_summary, occupancy_report, CbrSample, CbrWindow, DistanceBins, GrantStats, GrantSummary, OccupancyLedger,
    OccupancyRow,
};
use crate::mobility::{calibrated_speed_mps, mobility_step, place_vehicles, VehicleState};
use crate::phy::{
    decode, dbm_to_mw, pathloss_db, pssch_rsrp, received_power, s_rssi, BandContribution, DecodeInput, LinkSample,
    LossCause, PlacedPower,
};
use crate::resources::{Csr, ResourceId, Subframe, TransportBlock, SCI_RB_COUNT};
use crate::rng::{RngStream, StreamId, MAC, MOBILITY, PHY, PLACEMENT, TRAFFIC};
use crate::sched::{
    counter_step, random_schedule, str_on_arrival, str_on_reservation_subframe, str_redraw_if_claimed, CounterState,
    Occupancy, ReservationLedger, SchedulerVariant, StrPhase, StrState,
};
use crate::traffic::{next_packet, TrafficModel, TrafficState};

/// Horizon of the random scheduler and of cached reservation maps.
const HORIZON_MS: u32 = 100;

#[derive(Debug)]
enum Scheduler {
    Sps(Box<SpsMac>),
    Random(Option<(ResourceId, TransportBlock)>),
    Counter(Option<CounterState>),
    Str(Option<StrState>),
}

#[derive(Debug)]
struct Vehicle {
    state: VehicleState,
    class: usize,
    traffic: TrafficState,
    sensing: SensingRecord,
    ledger: ReservationLedger,
    cbr: CbrWindow,
    sched: Scheduler,
    /// Projection of decoded SCIs, reused while it covers the current
    /// subframe. SCIs decoded after it was built reserve at least one RRI
    /// later, so within its span only the RSRP averages can drift.
    map_cache: Option<ReservationMap>,
    rng_mac: RngStream,
    rng_traffic: RngStream,
    rng_mobility: RngStream,
    width: u32,
    rb_count: u32,
    payload_bytes: u32,
    last_arrival: Option<Subframe>,
}

#[derive(Debug, Clone, Copy)]
enum TxKind {
    Data { csr: Csr, rri_ms: u32 },
    Reservation { claim: ResourceId },
}

#[derive(Debug, Clone, Copy)]
struct Tx {
    sender: usize,
    kind: TxKind,
    rb_start: u32,
    rb_count: u32,
}

/// Per traffic class counters.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ClassSummary {
    pub name: String,
    pub model: String,
    pub scheduler: String,
    pub vehicles: usize,
    pub packets: u64,
    pub transmitted: u64,
    pub dropped: u64,
    pub interarrival_count: u64,
    pub interarrival_mean_ms: f64,
    pub interarrival_below_200_fraction: f64,
    pub interarrival_max_ms: u64,
    pub mean_pssch_cbr: f64,
    pub mean_pscch_cbr: f64,
    pub reservations_sent: u64,
    pub relinquished: u64,
    pub selection_fallbacks: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub master_seed: u64,
    pub vehicles: usize,
    pub subframes: u64,
    pub warmup_subframes: u64,
    pub mean_pssch_cbr: f64,
    pub mean_pscch_cbr: f64,
    pub classes: Vec<ClassSummary>,
    pub grants: Vec<GrantSummary>,
    pub occupancy: Vec<OccupancyRow>,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub pdr: DistanceBins,
    pub pdr_by_class: Vec<(String, DistanceBins)>,
    pub cbr: Vec<CbrSample>,
    pub grants: GrantStats,
    pub occupancy: Vec<OccupancyRow>,
    pub receptions: Vec<ReceptionRow>,
    pub summary: RunSummary,
}

#[derive(Debug, Default, Clone)]
struct ClassAcc {
    packets: u64,
    transmitted: u64,
    dropped: u64,
    gaps: u64,
    gap_sum: u64,
    gaps_below_200: u64,
    gap_max: u64,
    pssch_sum: f64,
    pscch_sum: f64,
    cbr_samples: u64,
    reservations: u64,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    now: Subframe,
    end: Subframe,
    warmup: Subframe,
    vehicles: Vec<Vehicle>,
    rng_phy: RngStream,
    pdr: DistanceBins,
    pdr_by_class: Vec<DistanceBins>,
    cbr_samples: Vec<CbrSample>,
    grants: GrantStats,
    occupancy: OccupancyLedger,
    receptions: Vec<ReceptionRow>,
    acc: Vec<ClassAcc>,
    debug_receptions: bool,
    tx_log: Vec<(Subframe, u32, u32, u32)>,
    log_transmissions: bool,
}

fn sps_config_for(base: &SpsConfig, variant: SchedulerVariant) -> SpsConfig {
    let mut cfg = base.clone();
    match variant {
        SchedulerVariant::SbspsNoRssi => cfg.rssi_filtering_enabled = false,
        SchedulerVariant::SbspsWindow(w) => cfg.sensing_window_ms = w,
        SchedulerVariant::SbspsNoBreak => cfg.grant_breaking_enabled = false,
        _ => {}
    }
    cfg
}

/// Reuses the vehicle's projection while it spans `[lo, hi]`, otherwise
/// rebuilds it over the next reservation horizon.
fn cached_map<'a>(
    cache: &'a mut Option<ReservationMap>,
    record: &SensingRecord,
    now: Subframe,
    lo: Subframe,
    hi: Subframe,
) -> &'a ReservationMap {
    if cache.as_ref().is_none_or(|m| !m.contains(lo) || !m.contains(hi)) {
        *cache = Some(ReservationMap::build(record, now, now, now + u64::from(HORIZON_MS)));
    }
    cache.as_ref().expect("just built")
}

fn rb_overlap(start: u32, count: u32, lo: u32, hi: u32) -> bool {
    start.max(lo) < (start + count).min(hi)
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let seed = cfg.master_seed;
        let mean_speed = cfg.mobility.mean_speed_mps.unwrap_or_else(|| calibrated_speed_mps(cfg.density));
        let mut placement = RngStream::new(seed, StreamId::global(PLACEMENT));
        let states = place_vehicles(cfg.density, &cfg.road, mean_speed, &mut placement);
        let n = states.len();

        let counts = cfg.class_counts(n);
        let mut classes: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(c, k)).collect();
        for i in (1..classes.len()).rev() {
            let j = placement.index(i + 1);
            classes.swap(i, j);
        }

        let nsub = cfg.layout.num_subchannels;
        let window = cfg.metrics.cbr_window_ms as usize;
        let mut vehicles = Vec::with_capacity(n);
        for (state, class) in states.into_iter().zip(classes) {
            let idx = u64::from(state.id.0);
            let tc = &cfg.traffic[class];
            let entry = cfg.layout.tb_entry(tc.payload_bytes, cfg.phy.mcs)?.clone();
            let mut rng_traffic = RngStream::new(seed, StreamId::indexed(TRAFFIC, idx));
            let traffic = TrafficState::new(0, &mut rng_traffic);
            let sched = match tc.scheduler {
                v if v.is_sbsps() => {
                    let mut mac = SpsMac::new(state.id, sps_config_for(&cfg.sps, v), entry.width);
                    mac.single_slot = matches!(tc.model, TrafficModel::SingleSlot { .. });
                    mac.coexistence = cfg.coexistence_fix;
                    Scheduler::Sps(Box::new(mac))
                }
                SchedulerVariant::Random => Scheduler::Random(None),
                SchedulerVariant::Counter => Scheduler::Counter(None),
                _ => Scheduler::Str(None),
            };
            let record_window = cfg.sps.sensing_window_ms.max(match tc.scheduler {
                SchedulerVariant::SbspsWindow(w) => w,
                _ => 0,
            });
            vehicles.push(Vehicle {
                sensing: SensingRecord::new(record_window, nsub),
                ledger: ReservationLedger::new(),
                cbr: CbrWindow::new(window),
                sched,
                map_cache: None,
                rng_mac: RngStream::new(seed, StreamId::indexed(MAC, idx)),
                rng_traffic,
                rng_mobility: RngStream::new(seed, StreamId::indexed(MOBILITY, idx)),
                width: entry.width,
                rb_count: entry.rb_count,
                payload_bytes: tc.payload_bytes,
                last_arrival: None,
                class,
                traffic,
                state,
            });
        }

        let warmup = cfg.warmup_subframes();
        let end = cfg.total_subframes();
        let bins = || DistanceBins::new(cfg.metrics.bin_width_m, cfg.metrics.max_distance_m);
        Ok(Self {
            now: 0,
            end,
            warmup,
            rng_phy: RngStream::new(seed, StreamId::global(PHY)),
            pdr: bins(),
            pdr_by_class: cfg.traffic.iter().map(|_| bins()).collect(),
            cbr_samples: Vec::new(),
            grants: GrantStats::default(),
            occupancy: OccupancyLedger::new(warmup, end, nsub),
            receptions: Vec::new(),
            acc: vec![ClassAcc::default(); cfg.traffic.len()],
            debug_receptions: cfg.output.debug_receptions,
            tx_log: Vec::new(),
            log_transmissions: false,
            vehicles,
            cfg,
        })
    }

    pub fn clock(&self) -> Subframe {
        self.now
    }

    pub fn finished(&self) -> bool {
        self.now >= self.end
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Keeps `(subframe, sender, first subchannel, rb_count)` of every
    /// transmission for trace comparisons.
    pub fn enable_transmission_log(&mut self) {
        self.log_transmissions = true;
    }

    pub fn transmission_log(&self) -> &[(Subframe, u32, u32, u32)] {
        &self.tx_log
    }

    /// Runs one subframe and returns the new clock.
    pub fn advance(&mut self) -> Subframe {
        assert!(!self.finished(), "simulation already finished");
        let now = self.now;
        self.phase_mobility(now);
        let arrivals = self.phase_traffic(now);
        let txs = self.phase_mac(now, arrivals);
        let txs = self.phase_phy_tx(now, txs);
        let busy = self.phase_receive(now, &txs);
        self.phase_metrics(now, &busy);
        self.now += 1;
        self.now
    }

    pub fn run(mut self) -> RunResult {
        while !self.finished() {
            self.advance();
        }
        self.finish()
    }

    fn phase_mobility(&mut self, now: Subframe) {
        if now == 0 {
            return;
        }
        let road = &self.cfg.road;
        let mcfg = &self.cfg.mobility;
        for v in &mut self.vehicles {
            mobility_step(&mut v.state, 0.001, road, mcfg, &mut v.rng_mobility);
        }
    }

    fn phase_traffic(&mut self, now: Subframe) -> Vec<Option<TransportBlock>> {
        let measuring = now >= self.warmup;
        let mut out = Vec::with_capacity(self.vehicles.len());
        for v in &mut self.vehicles {
            let model = &self.cfg.traffic[v.class].model;
            if !next_packet(model, &mut v.traffic, &v.state, now, &mut v.rng_traffic) {
                out.push(None);
                continue;
            }
            let acc = &mut self.acc[v.class];
            if measuring {
                acc.packets += 1;
                if let Some(prev) = v.last_arrival {
                    let gap = now - prev;
                    acc.gaps += 1;
                    acc.gap_sum += gap;
                    acc.gaps_below_200 += u64::from(gap < 200);
                    acc.gap_max = acc.gap_max.max(gap);
                }
            }
            v.last_arrival = Some(now);
            out.push(Some(TransportBlock {
                sender: v.state.id,
                payload_bytes: v.payload_bytes,
                rb_count: v.rb_count,
                origin_time: now,
            }));
        }
        out
    }

    fn record_grant(&mut self, class: usize, rec: GrantRecord) {
        if rec.ended_at >= self.warmup {
            let label = self.cfg.traffic[class].model.label().to_string();
            self.grants.records.push((label, rec));
        }
    }

    fn phase_mac(&mut self, now: Subframe, arrivals: Vec<Option<TransportBlock>>) -> Vec<Tx> {
        let measuring = now >= self.warmup;
        let nsub = self.cfg.layout.num_subchannels;
        let base_thr = self.cfg.sps.rsrp_threshold_dbm;
        let str_cfg = self.cfg.str.clone();
        let counter_cfg = self.cfg.counter.clone();
        let mut txs = Vec::new();
        let mut finished: Vec<(usize, GrantRecord)> = Vec::new();
        let mut unused: Vec<Csr> = Vec::new();

        for (i, arrival) in arrivals.into_iter().enumerate() {
            let Vehicle { sensing, ledger, sched, map_cache, rng_mac, class, state, width, .. } = &mut self.vehicles[i];
            let me = state.id;
            let acc = &mut self.acc[*class];
            let data = |csr: Csr, tb: TransportBlock, rri_ms: u32| Tx {
                sender: i,
                kind: TxKind::Data { csr, rri_ms },
                rb_start: 0,
                rb_count: tb.rb_count,
            };
            match sched {
                Scheduler::Sps(mac) => {
                    let ctx = MacContext { record: sensing, layout: &self.cfg.layout, ledger };
                    let step = mac.on_subframe(now, &ctx, rng_mac);
                    if let Some((csr, tb)) = step.transmit {
                        txs.push(data(csr, tb, mac.cfg.rri_ms));
                    }
                    finished.extend(step.finished.into_iter().map(|r| (*class, r)));
                    unused.extend(step.unused);
                    if let Some(tb) = arrival {
                        let before = mac.dropped;
                        let action = mac.on_packet_arrival(tb, now, &ctx, rng_mac);
                        if measuring && (mac.dropped > before || action == ArrivalAction::Replaced) {
                            acc.dropped += 1;
                        }
                    }
                }
                Scheduler::Random(pending) => {
                    if let Some((slot, tb)) = *pending {
                        if slot.subframe == now {
                            txs.push(data(Csr::new(now, slot.subchannel, *width), tb, 0));
                            *pending = None;
                        }
                    }
                    if let Some(tb) = arrival {
                        match pending {
                            Some((_, old)) => {
                                *old = tb;
                                if measuring {
                                    acc.dropped += 1;
                                }
                            }
                            None => {
                                let mut slot = random_schedule(now, HORIZON_MS, nsub - *width + 1, rng_mac);
                                slot.subchannel = slot.subchannel.min(nsub - *width);
                                *pending = Some((slot, tb));
                            }
                        }
                    }
                }
                Scheduler::Counter(pending) => {
                    if let Some(st) = pending {
                        let map = cached_map(map_cache, sensing, now, now, now);
                        let free = map.free_subchannels(now, base_thr);
                        if let Some(sc) = counter_step(st, &free, rng_mac) {
                            txs.push(data(Csr::new(now, sc, 1), st.pending, 0));
                            *pending = None;
                        }
                    }
                    if let Some(tb) = arrival {
                        match pending {
                            Some(st) => {
                                st.pending = tb;
                                if measuring {
                                    acc.dropped += 1;
                                }
                            }
                            None => *pending = Some(CounterState::new(tb, &counter_cfg, rng_mac)),
                        }
                    }
                }
                Scheduler::Str(pending) => {
                    if let Some(st) = pending {
                        match st.phase {
                            StrPhase::Listening => {
                                let map = cached_map(map_cache, sensing, now, st.window1.0.max(now), st.window1.1);
                                let occ = Occupancy { me, ledger, map, threshold_dbm: base_thr };
                                str_redraw_if_claimed(st, now, nsub, &occ, rng_mac);
                                if st.reservation_slot.subframe == now {
                                    *map_cache = Some(ReservationMap::build(sensing, now, st.window2.0, st.window2.1));
                                    let map = map_cache.as_ref().expect("built");
                                    let occ = Occupancy { me, ledger, map, threshold_dbm: base_thr };
                                    let claim = str_on_reservation_subframe(st, nsub, &occ, rng_mac);
                                    ledger.insert(claim, me);
                                    if measuring {
                                        acc.reservations += 1;
                                    }
                                    txs.push(Tx {
                                        sender: i,
                                        kind: TxKind::Reservation { claim },
                                        rb_start: self.cfg.layout.subchannel_rb_start(st.reservation_slot.subchannel),
                                        rb_count: SCI_RB_COUNT,
                                    });
                                }
                            }
                            StrPhase::Reserved => {
                                let slot = st.data_slot.expect("reserved state has a data slot");
                                if slot.subframe == now {
                                    txs.push(data(Csr::new(now, slot.subchannel, 1), st.pending, 0));
                                    *pending = None;
                                }
                            }
                        }
                    }
                    if let Some(tb) = arrival {
                        match pending {
                            Some(st) => {
                                st.pending = tb;
                                if measuring {
                                    acc.dropped += 1;
                                }
                            }
                            None => {
                                *map_cache = Some(ReservationMap::build(sensing, now, now + 1, now + u64::from(HORIZON_MS)));
                                let map = map_cache.as_ref().expect("built");
                                let occ = Occupancy { me, ledger, map, threshold_dbm: base_thr };
                                *pending = Some(str_on_arrival(tb, now, &str_cfg, nsub, &occ, rng_mac));
                            }
                        }
                    }
                }
            }
        }

        for (class, rec) in finished {
            self.record_grant(class, rec);
        }
        for csr in &unused {
            self.occupancy.mark_reserved_unused(csr);
        }
        txs
    }

    fn phase_phy_tx(&mut self, now: Subframe, mut txs: Vec<Tx>) -> Vec<Tx> {
        let measuring = now >= self.warmup;
        for tx in &mut txs {
            let v = &mut self.vehicles[tx.sender];
            v.sensing.record_own_tx(now);
            if let TxKind::Data { csr, .. } = tx.kind {
                tx.rb_start = self.cfg.layout.subchannel_rb_start(csr.first.subchannel);
                self.occupancy.mark_occupied(&csr);
                if measuring {
                    self.acc[v.class].transmitted += 1;
                }
                if self.log_transmissions {
                    self.tx_log.push((now, v.state.id.0, csr.first.subchannel, tx.rb_count));
                }
            }
        }
        txs
    }

    /// Decodes every transmission at every other vehicle, updates sensing
    /// and ledgers, and returns per-vehicle busy subchannel counts.
    fn phase_receive(&mut self, now: Subframe, txs: &[Tx]) -> Vec<(u8, u8)> {
        let n = self.vehicles.len();
        let layout = &self.cfg.layout;
        let phy = &self.cfg.phy;
        let nsub = layout.num_subchannels;
        let band_rbs = layout.rbs_per_subchannel;
        let noise_band = phy.noise_mw(band_rbs);
        let measuring = now >= self.warmup;

        let mut transmitting = vec![false; n];
        for tx in txs {
            transmitting[tx.sender] = true;
        }
        let mut busy = vec![(0u8, 0u8); n];
        if txs.is_empty() {
            return busy;
        }

        let mut placed: Vec<Option<(PlacedPower, LinkSample)>> = vec![None; txs.len()];
        let mut others: Vec<PlacedPower> = Vec::with_capacity(txs.len());
        for r in 0..n {
            let (rx_x, rx_lane) = (self.vehicles[r].state.position_m, self.vehicles[r].state.lane);
            for (k, tx) in txs.iter().enumerate() {
                if tx.sender == r {
                    placed[k] = None;
                    continue;
                }
                let s = &self.vehicles[tx.sender].state;
                let d = self.cfg.road.distance(s.position_m, s.lane, rx_x, rx_lane);
                let pl = pathloss_db(d, &phy.pathloss, phy.carrier_ghz, phy.min_distance_m);
                let z: f64 = StandardNormal.sample(self.rng_phy.raw());
                let link = LinkSample::new(phy.tx_power_dbm, d, pl, z * phy.shadowing_sigma_los_db);
                let power = received_power(&link, tx.rb_count);
                placed[k] = Some((PlacedPower { power, rb_start: tx.rb_start }, link));
            }

            if transmitting[r] {
                // Own transmissions mark their subchannels busy; nothing
                // else can be measured while transmitting.
                let mut pssch = 0u8;
                let mut pscch = 0u8;
                for tx in txs.iter().filter(|t| t.sender == r) {
                    for sc in 0..nsub {
                        let start = layout.subchannel_rb_start(sc);
                        pssch += u8::from(rb_overlap(tx.rb_start, tx.rb_count, start, start + band_rbs));
                        pscch += u8::from(rb_overlap(tx.rb_start, tx.rb_count, start, start + SCI_RB_COUNT));
                    }
                }
                busy[r] = (pssch.min(nsub as u8), pscch.min(nsub as u8));
            } else {
                for sc in 0..nsub {
                    let start = layout.subchannel_rb_start(sc);
                    let mut band: Vec<BandContribution> = Vec::new();
                    let mut ctrl: Vec<BandContribution> = Vec::new();
                    let mut audible = false;
                    for (p, _) in placed.iter().flatten() {
                        let ov = p.overlap(start, start + band_rbs);
                        if ov > 0 {
                            band.push(BandContribution { power: p.power, overlapping_rbs: ov });
                            audible |= p.power.per_rb_mw * f64::from(ov) >= noise_band;
                        }
                        let ov = p.overlap(start, start + SCI_RB_COUNT);
                        if ov > 0 {
                            ctrl.push(BandContribution { power: p.power, overlapping_rbs: ov });
                        }
                    }
                    let rssi = s_rssi(&band, band_rbs, phy);
                    if audible {
                        self.vehicles[r].sensing.record_rssi(now, sc, dbm_to_mw(rssi));
                    }
                    if rssi > phy.cbr_threshold_dbm {
                        busy[r].0 += 1;
                    }
                    if s_rssi(&ctrl, SCI_RB_COUNT, phy) > phy.cbr_threshold_dbm {
                        busy[r].1 += 1;
                    }
                }
            }

            for (k, tx) in txs.iter().enumerate() {
                let Some((signal, link)) = placed[k] else { continue };
                others.clear();
                others.extend(placed.iter().enumerate().filter(|&(j, _)| j != k).filter_map(|(_, p)| p.map(|x| x.0)));
                let u1 = self.rng_phy.unit();
                let u2 = self.rng_phy.unit();
                let input = DecodeInput {
                    link: &link,
                    signal,
                    interferers: &others,
                    receiver_transmitting: transmitting[r],
                    mcs: phy.mcs,
                };
                let outcome = decode(&input, phy, u1, u2).expect("MCS validated at load");
                let sender = &self.vehicles[tx.sender];
                let sender_id = sender.state.id;
                let sender_class = sender.class;
                match tx.kind {
                    TxKind::Data { csr, rri_ms, .. } => {
                        if measuring {
                            self.pdr.record_reception(&outcome);
                            self.pdr_by_class[sender_class].record_reception(&outcome);
                            if self.debug_receptions {
                                self.receptions.push(ReceptionRow {
                                    subframe: now,
                                    tx: sender_id.0,
                                    rx: self.vehicles[r].state.id.0,
                                    distance_m: outcome.distance_m,
                                    sinr_db: outcome.sinr_mean_db,
                                    verdict: if outcome.decoded() { "decoded" } else { "lost" },
                                    cause: cause_label(outcome.cause),
                                });
                            }
                        }
                        if outcome.decoded() {
                            let sci = DecodedSci { sender: sender_id, rri_ms, resource: csr, rsrp_dbm: pssch_rsrp(&signal.power) };
                            self.vehicles[r].sensing.record_sci(now, sci);
                        }
                    }
                    TxKind::Reservation { claim } => {
                        if outcome.decoded() {
                            self.vehicles[r].ledger.insert(claim, sender_id);
                        }
                    }
                }
            }
        }
        busy
    }

    fn phase_metrics(&mut self, now: Subframe, busy: &[(u8, u8)]) {
        let nsub = self.cfg.layout.num_subchannels;
        let sample = now >= self.warmup && (now - self.warmup).is_multiple_of(u64::from(self.cfg.metrics.cbr_sample_ms));
        for (v, &(pssch, pscch)) in self.vehicles.iter_mut().zip(busy) {
            v.cbr.push(pssch, pscch);
            if sample {
                if let Some((a, b)) = v.cbr.cbr(nsub) {
                    self.cbr_samples.push(CbrSample { subframe: now, vehicle: v.state.id.0, pssch: a, pscch: b });
                    let acc = &mut self.acc[v.class];
                    acc.pssch_sum += a;
                    acc.pscch_sum += b;
                    acc.cbr_samples += 1;
                }
            }
        }
        if now.is_multiple_of(100) {
            for v in &mut self.vehicles {
                v.ledger.expire(now);
            }
        }
    }

    pub fn finish(self) -> RunResult {
        let occupancy = occupancy_report(&self.occupancy);
        let mut per_class_counts: BTreeMap<usize, usize> = BTreeMap::new();
        let mut relinquished = vec![0u64; self.cfg.traffic.len()];
        let mut fallbacks = vec![0u64; self.cfg.traffic.len()];
        for v in &self.vehicles {
            *per_class_counts.entry(v.class).or_default() += 1;
            if let Scheduler::Sps(mac) = &v.sched {
                relinquished[v.class] += mac.relinquished;
                fallbacks[v.class] += mac.selection_fallbacks;
            }
        }
        let classes: Vec<ClassSummary> = self
            .cfg
            .traffic
            .iter()
            .enumerate()
            .map(|(c, tc)| {
                let a = &self.acc[c];
                let ratio = |num: f64, den: u64| if den == 0 { 0.0 } else { num / den as f64 };
                ClassSummary {
                    name: tc.name.clone(),
                    model: tc.model.label().to_string(),
                    scheduler: tc.scheduler.to_string(),
                    vehicles: per_class_counts.get(&c).copied().unwrap_or(0),
                    packets: a.packets,
                    transmitted: a.transmitted,
                    dropped: a.dropped,
                    interarrival_count: a.gaps,
                    interarrival_mean_ms: ratio(a.gap_sum as f64, a.gaps),
                    interarrival_below_200_fraction: ratio(a.gaps_below_200 as f64, a.gaps),
                    interarrival_max_ms: a.gap_max,
                    mean_pssch_cbr: ratio(a.pssch_sum, a.cbr_samples),
                    mean_pscch_cbr: ratio(a.pscch_sum, a.cbr_samples),
                    reservations_sent: a.reservations,
                    relinquished: relinquished[c],
                    selection_fallbacks: fallbacks[c],
                }
            })
            .collect();
        let samples = self.cbr_samples.len().max(1) as f64;
        let summary = RunSummary {
            master_seed: self.cfg.master_seed,
            vehicles: self.vehicles.len(),
            subframes: self.now,
            warmup_subframes: self.warmup,
            mean_pssch_cbr: self.cbr_samples.iter().map(|s| s.pssch).sum::<f64>() / samples,
            mean_pscch_cbr: self.cbr_samples.iter().map(|s| s.pscch).sum::<f64>() / samples,
            classes,
            grants: grant_summary(&self.grants),
            occupancy: occupancy.clone(),
        };
        RunResult {
            pdr: self.pdr,
            pdr_by_class: self.cfg.traffic.iter().map(|t| t.name.clone()).zip(self.pdr_by_class).collect(),
            cbr: self.cbr_samples,
            grants: self.grants,
            occupancy,
            receptions: self.receptions,
            summary,
        }
    }
}

fn cause_label(cause: Option<LossCause>) -> &'static str {
    match cause {
        None => "none",
        Some(LossCause::HalfDuplex) => "hd",
        Some(LossCause::Sensing) => "sen",
        Some(LossCause::Propagation) => "pro",
        Some(LossCause::Collision) => "col",
    }
}
