//! Shared helpers for the integration and acceptance targets: a brute-force
//! candidate filter written directly from the selection rules, random small
//! instances for it, and scenario builders.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cv2x_mode4::config::TrafficClass;
use cv2x_mode4::mac::{select_csr, DecodedSci, Selection, SensingRecord, SpsConfig};
use cv2x_mode4::phy::dbm_to_mw;
use cv2x_mode4::resources::{ChannelLayout, Csr, Subframe, VehicleId};
use cv2x_mode4::rng::{RngStream, StreamId, MAC};
use cv2x_mode4::{ScenarioConfig, SchedulerVariant, TrafficModel};

#[derive(Debug, Clone)]
pub enum Event {
    OwnTx(Subframe),
    Sci(Subframe, DecodedSci),
    Rssi(Subframe, u32, f64),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub layout: ChannelLayout,
    pub cfg: SpsConfig,
    pub now: Subframe,
    pub width: u32,
    pub window_ms: u32,
    pub events: Vec<Event>,
    pub seed: u64,
}

impl Instance {
    /// A random instance with at most 10 candidate subframes and 3
    /// subchannels.
    pub fn random(seed: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let nsub = r.random_range(1..=3u32);
        let width = r.random_range(1..=nsub);
        let rri = r.random_range(2..=10u32);
        let window_ms = r.random_range(5..=40u32);
        let now: Subframe = 200;
        let cfg = SpsConfig {
            rri_ms: rri,
            selection_t1_ms: 1,
            sensing_window_ms: window_ms,
            rsrp_threshold_dbm: -110.0,
            rsrp_step_db: 3.0,
            min_candidate_fraction: [0.2, 0.5][r.random_range(0..2)],
            rssi_keep_fraction: [0.2, 0.5][r.random_range(0..2)],
            rssi_filtering_enabled: r.random_bool(0.8),
            half_duplex_exclusion: r.random_bool(0.8),
            ..SpsConfig::default()
        };
        let layout = ChannelLayout { num_subchannels: nsub, ..ChannelLayout::default() };
        let mut events = Vec::new();
        for sf in now - u64::from(window_ms)..now {
            if r.random_bool(0.1) {
                events.push(Event::OwnTx(sf));
                continue;
            }
            let n_sci = if r.random_bool(0.4) { r.random_range(1..=2) } else { 0 };
            for _ in 0..n_sci {
                let w = r.random_range(1..=nsub);
                let sc = r.random_range(0..=nsub - w);
                let sci_rri = match r.random_range(0..4) {
                    0 => 0,
                    1 => rri,
                    _ => r.random_range(1..=12),
                };
                events.push(Event::Sci(
                    sf,
                    DecodedSci {
                        sender: VehicleId(r.random_range(0..6)),
                        rri_ms: sci_rri,
                        resource: Csr::new(sf, sc, w),
                        rsrp_dbm: r.random_range(-125.0..-85.0),
                    },
                ));
            }
            for sc in 0..nsub {
                if r.random_bool(0.6) {
                    events.push(Event::Rssi(sf, sc, dbm_to_mw(r.random_range(-115.0..-85.0))));
                }
            }
        }
        Self { layout, cfg, now, width, window_ms, events, seed }
    }

    pub fn record(&self) -> SensingRecord {
        let mut rec = SensingRecord::new(self.window_ms, self.layout.num_subchannels);
        for e in &self.events {
            match *e {
                Event::OwnTx(sf) => rec.record_own_tx(sf),
                Event::Sci(sf, sci) => rec.record_sci(sf, sci),
                Event::Rssi(sf, sc, mw) => rec.record_rssi(sf, sc, mw),
            }
        }
        rec
    }

    pub fn rng(&self) -> RngStream {
        RngStream::new(self.seed, StreamId::global(MAC))
    }

    pub fn select(&self) -> Option<Selection> {
        select_csr(&self.record(), &self.layout, &self.cfg, self.now, self.width, &mut self.rng())
    }
}

fn ranges_meet(a: &Csr, b: &Csr) -> bool {
    a.first.subchannel < b.first.subchannel + b.width && b.first.subchannel < a.first.subchannel + a.width
}

/// Brute-force selection straight from the rules: every candidate is
/// scored against every sensed event with no projection tables.
pub fn oracle_select(inst: &Instance) -> Option<Selection> {
    let cfg = &inst.cfg;
    let now = inst.now;
    let lo = now - u64::from(inst.window_ms);
    let nsub = inst.layout.num_subchannels;
    let rri = u64::from(cfg.rri_ms);

    let own: Vec<Subframe> = inst.events.iter().filter_map(|e| match e {
        Event::OwnTx(sf) if *sf >= lo && *sf < now => Some(*sf),
        _ => None,
    }).collect();
    let scis: Vec<(Subframe, DecodedSci)> = inst.events.iter().filter_map(|e| match e {
        Event::Sci(sf, s) if *sf >= lo && *sf < now && !own.contains(sf) => Some((*sf, *s)),
        _ => None,
    }).collect();
    let mut rssi: HashMap<(Subframe, u32), f64> = HashMap::new();
    for e in &inst.events {
        if let Event::Rssi(sf, sc, mw) = e {
            if *sf >= lo && *sf < now && !own.contains(sf) {
                rssi.insert((*sf, *sc), *mw);
            }
        }
    }
    let mut sender_sum: HashMap<VehicleId, (f64, f64)> = HashMap::new();
    for (_, s) in &scis {
        let e = sender_sum.entry(s.sender).or_default();
        e.0 += dbm_to_mw(s.rsrp_dbm);
        e.1 += 1.0;
    }
    let sender_dbm = |v: VehicleId| {
        let (sum, n) = sender_sum[&v];
        10.0 * (sum / n).log10()
    };

    let mut cands = Vec::new();
    for sf in now + u64::from(cfg.selection_t1_ms)..=now + rri {
        for sc in 0..nsub {
            if sc + inst.width <= nsub {
                cands.push(Csr::new(sf, sc, inst.width));
            }
        }
    }
    let mut rng = inst.rng();
    let tiebreak: Vec<u64> = cands.iter().map(|_| rng.next_u64()).collect();
    if cands.is_empty() {
        return None;
    }

    let rsrp: Vec<f64> = cands
        .iter()
        .map(|c| {
            let mut best = f64::NEG_INFINITY;
            for (ts, s) in &scis {
                let p = u64::from(s.rri_ms);
                if p > 0 && c.subframe() > *ts && (c.subframe() - ts) % p == 0 && ranges_meet(c, &s.resource) {
                    best = best.max(sender_dbm(s.sender));
                }
            }
            best
        })
        .collect();
    let hd: Vec<bool> = cands
        .iter()
        .map(|c| cfg.half_duplex_exclusion && own.iter().any(|&t| c.subframe() > t && (c.subframe() - t) % rri == 0))
        .collect();

    let total = cands.len();
    let needed = (cfg.min_candidate_fraction * total as f64).ceil() as usize;
    let mut threshold = cfg.rsrp_threshold_dbm;
    let mut keep: Vec<usize>;
    loop {
        keep = (0..total).filter(|&i| !hd[i] && rsrp[i] <= threshold).collect();
        let anything_excluded = rsrp.iter().any(|&p| p > threshold);
        if keep.len() >= needed || !anything_excluded {
            break;
        }
        threshold += cfg.rsrp_step_db;
    }
    if keep.len() < needed {
        keep = (0..total).filter(|&i| rsrp[i] <= threshold).collect();
    }

    if cfg.rssi_filtering_enabled {
        let quota = (cfg.rssi_keep_fraction * total as f64).ceil() as usize;
        if keep.len() > quota {
            let score = |c: &Csr| {
                let mut sum = 0.0;
                let mut n = 0;
                let mut sf = c.subframe();
                while sf >= rri + lo {
                    sf -= rri;
                    if sf < now {
                        for sc in c.subchannels() {
                            if let Some(v) = rssi.get(&(sf, sc)) {
                                sum += v;
                                n += 1;
                            }
                        }
                    }
                }
                if n == 0 { f64::NEG_INFINITY } else { sum / f64::from(n) }
            };
            keep.sort_by(|&a, &b| {
                score(&cands[a]).total_cmp(&score(&cands[b])).then(tiebreak[a].cmp(&tiebreak[b])).then(a.cmp(&b))
            });
            keep.truncate(quota);
            keep.sort_unstable();
        }
    }

    let survivors: Vec<Csr> = keep.iter().map(|&i| cands[i]).collect();
    if survivors.is_empty() {
        let csr = cands[rng.index(total)];
        return Some(Selection { csr, survivors: cands, fallback: true });
    }
    let csr = survivors[rng.index(survivors.len())];
    Some(Selection { csr, survivors, fallback: false })
}

/// Runs `n` random instances and returns the seeds that disagree.
pub fn oracle_mismatches(n: u64) -> Vec<u64> {
    (0..n)
        .filter(|&seed| {
            let inst = Instance::random(seed);
            inst.select() != oracle_select(&inst)
        })
        .collect()
}

pub fn class(name: &str, model: TrafficModel, scheduler: SchedulerVariant, fraction: f64) -> TrafficClass {
    TrafficClass::new(name, model, scheduler, fraction)
}

/// A headline-length scenario on the default 2 km ring.
pub fn scenario(density: f64, seed: u64, classes: Vec<TrafficClass>) -> ScenarioConfig {
    ScenarioConfig { master_seed: seed, density, duration_s: 30.0, warmup_s: 5.0, traffic: classes, ..ScenarioConfig::default() }
}

/// A short scenario for integration tests.
pub fn small_scenario(seed: u64, classes: Vec<TrafficClass>) -> ScenarioConfig {
    ScenarioConfig { master_seed: seed, density: 0.03, duration_s: 3.0, warmup_s: 1.0, traffic: classes, ..ScenarioConfig::default() }
}
