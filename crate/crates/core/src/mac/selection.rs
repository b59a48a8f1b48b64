//! Candidate resource filtering: RSRP exclusion with threshold escalation,
//! S-RSSI ranking, then a uniform MAC pick.

use std::collections::HashMap;

use crate::mac::sensing::SensingRecord;
use crate::mac::SpsConfig;
use crate::phy::{dbm_to_mw, mw_to_dbm};
use crate::resources::{enumerate_csrs, ChannelLayout, Csr, Subframe, VehicleId};
use crate::rng::RngStream;

/// Strongest announced reservation per cell over a window, from projecting
/// decoded SCIs forward by their reservation interval.
#[derive(Debug, Clone)]
pub struct ReservationMap {
    start: Subframe,
    end: Subframe,
    num_subchannels: u32,
    /// Max average RSRP (dBm) of any SCI projecting onto the cell.
    max_rsrp: Vec<f64>,
}

impl ReservationMap {
    /// Projects every SCI sensed before `now` onto `[start, end]`.
    ///
    /// A sender's RSRP is the linear average over all of its SCIs in the
    /// sensing window.
    pub fn build(record: &SensingRecord, now: Subframe, start: Subframe, end: Subframe) -> Self {
        let nsub = record.num_subchannels();
        let len = if end >= start { (end - start + 1) as usize } else { 0 };
        let mut map = Self {
            start,
            end,
            num_subchannels: nsub,
            max_rsrp: vec![f64::NEG_INFINITY; len * nsub as usize],
        };
        if len == 0 {
            return map;
        }
        let mut per_sender: HashMap<VehicleId, (f64, u32)> = HashMap::new();
        for slot in record.window(now) {
            for sci in slot.scis {
                let e = per_sender.entry(sci.sender).or_insert((0.0, 0));
                e.0 += dbm_to_mw(sci.rsrp_dbm);
                e.1 += 1;
            }
        }
        for slot in record.window(now) {
            for sci in slot.scis {
                if sci.rri_ms == 0 {
                    continue;
                }
                let (sum, n) = per_sender[&sci.sender];
                let avg = mw_to_dbm(sum / f64::from(n));
                let rri = u64::from(sci.rri_ms);
                let ts = slot.subframe;
                let mut k = if start > ts { (start - ts).div_ceil(rri) } else { 1 }.max(1);
                while ts + k * rri <= end {
                    let sf = ts + k * rri;
                    for sc in sci.resource.subchannels() {
                        if sc < nsub {
                            let idx = map.index(sf, sc);
                            if avg > map.max_rsrp[idx] {
                                map.max_rsrp[idx] = avg;
                            }
                        }
                    }
                    k += 1;
                }
            }
        }
        map
    }

    fn index(&self, sf: Subframe, sc: u32) -> usize {
        (sf - self.start) as usize * self.num_subchannels as usize + sc as usize
    }

    pub fn contains(&self, sf: Subframe) -> bool {
        sf >= self.start && sf <= self.end
    }

    /// Strongest projected RSRP on a cell, `-inf` when unreserved.
    pub fn cell_rsrp(&self, sf: Subframe, sc: u32) -> f64 {
        if !self.contains(sf) || sc >= self.num_subchannels {
            return f64::NEG_INFINITY;
        }
        self.max_rsrp[self.index(sf, sc)]
    }

    pub fn csr_rsrp(&self, csr: &Csr) -> f64 {
        csr.subchannels()
            .map(|sc| self.cell_rsrp(csr.subframe(), sc))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_reserved(&self, sf: Subframe, sc: u32, threshold_dbm: f64) -> bool {
        self.cell_rsrp(sf, sc) > threshold_dbm
    }

    /// Subchannels of `sf` with no reservation above the threshold.
    pub fn free_subchannels(&self, sf: Subframe, threshold_dbm: f64) -> Vec<u32> {
        (0..self.num_subchannels).filter(|&sc| !self.is_reserved(sf, sc, threshold_dbm)).collect()
    }
}

/// Subframes in `[start, end]` that fall on a multiple of `rri_ms` after a
/// subframe in which the owner transmitted.
pub fn half_duplex_blocked(record: &SensingRecord, now: Subframe, start: Subframe, end: Subframe, rri_ms: u32) -> Vec<bool> {
    let len = if end >= start { (end - start + 1) as usize } else { 0 };
    let mut blocked = vec![false; len];
    let rri = u64::from(rri_ms);
    for slot in record.window(now).filter(|s| s.own_tx) {
        let ts = slot.subframe;
        let mut k = if start > ts { (start - ts).div_ceil(rri) } else { 1 }.max(1);
        while ts + k * rri <= end {
            blocked[(ts + k * rri - start) as usize] = true;
            k += 1;
        }
    }
    blocked
}

/// Linear mean S-RSSI of a candidate over the sensed subframes that precede
/// it by whole reservation intervals. `None` when nothing was measured.
pub fn average_rssi_mw(record: &SensingRecord, now: Subframe, csr: &Csr, rri_ms: u32) -> Option<f64> {
    let rri = u64::from(rri_ms);
    let lo = now.saturating_sub(u64::from(record.window_ms()));
    let mut sum = 0.0;
    let mut n = 0u32;
    let mut k = 1;
    while csr.subframe() >= k * rri {
        let sf = csr.subframe() - k * rri;
        if sf < lo {
            break;
        }
        if sf < now {
            if let Some(slot) = record.slot(sf) {
                for sc in csr.subchannels() {
                    if let Some(v) = slot.rssi_mw(sc) {
                        sum += v;
                        n += 1;
                    }
                }
            }
        }
        k += 1;
    }
    (n > 0).then(|| sum / f64::from(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub enumerated: Vec<Csr>,
    pub survivors: Vec<Csr>,
    /// Threshold in force when the RSRP stage stopped.
    pub threshold_dbm: f64,
    pub iterations: u32,
    /// Half-duplex exclusions were dropped because RSRP escalation alone
    /// could not reach the minimum candidate count.
    pub half_duplex_relaxed: bool,
}

/// The filtering pipeline without the final random pick.
///
/// Candidates span `[now + t1, now + rri]`. `tiebreak[i]` orders equal
/// S-RSSI ranks for the i-th enumerated candidate.
pub fn filter_candidates(
    record: &SensingRecord,
    layout: &ChannelLayout,
    cfg: &SpsConfig,
    now: Subframe,
    width: u32,
    tiebreak: &[u64],
) -> FilterOutcome {
    let start = now + u64::from(cfg.selection_t1_ms);
    let end = now + u64::from(cfg.rri_ms);
    let enumerated = enumerate_csrs(layout, start, end, width);
    assert_eq!(tiebreak.len(), enumerated.len(), "one tiebreak key per candidate");
    let total = enumerated.len();
    if total == 0 {
        return FilterOutcome {
            enumerated,
            survivors: Vec::new(),
            threshold_dbm: cfg.rsrp_threshold_dbm,
            iterations: 0,
            half_duplex_relaxed: false,
        };
    }

    let map = ReservationMap::build(record, now, start, end);
    let blocked = if cfg.half_duplex_exclusion {
        half_duplex_blocked(record, now, start, end, cfg.rri_ms)
    } else {
        vec![false; (end - start + 1) as usize]
    };
    let keys: Vec<f64> = enumerated.iter().map(|c| map.csr_rsrp(c)).collect();
    let hd: Vec<bool> = enumerated.iter().map(|c| blocked[(c.subframe() - start) as usize]).collect();
    let max_key = keys.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let needed = cfg.min_candidates(total);
    let mut threshold = cfg.rsrp_threshold_dbm;
    let mut iterations = 0;
    let mut idx: Vec<usize>;
    loop {
        iterations += 1;
        idx = (0..total).filter(|&i| !hd[i] && keys[i] <= threshold).collect();
        if idx.len() >= needed || max_key <= threshold {
            break;
        }
        threshold += cfg.rsrp_step_db;
    }
    let mut half_duplex_relaxed = false;
    if idx.len() < needed {
        half_duplex_relaxed = true;
        idx = (0..total).filter(|&i| keys[i] <= threshold).collect();
    }

    if cfg.rssi_filtering_enabled {
        let keep = cfg.rssi_keep(total);
        if idx.len() > keep {
            let mut ranked: Vec<(f64, u64, usize)> = idx
                .iter()
                .map(|&i| {
                    let rssi = average_rssi_mw(record, now, &enumerated[i], cfg.rri_ms).unwrap_or(f64::NEG_INFINITY);
                    (rssi, tiebreak[i], i)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            ranked.truncate(keep);
            idx = ranked.into_iter().map(|r| r.2).collect();
            idx.sort_unstable();
        }
    }

    let survivors = idx.iter().map(|&i| enumerated[i]).collect();
    FilterOutcome { enumerated, survivors, threshold_dbm: threshold, iterations, half_duplex_relaxed }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub csr: Csr,
    /// Candidates reported to the MAC; kept for deferred re-selection.
    pub survivors: Vec<Csr>,
    pub fallback: bool,
}

/// Full SB-SPS selection: filter, then pick uniformly among survivors.
/// Returns `None` only when no candidate of this width exists at all.
pub fn select_csr(
    record: &SensingRecord,
    layout: &ChannelLayout,
    cfg: &SpsConfig,
    now: Subframe,
    width: u32,
    rng: &mut RngStream,
) -> Option<Selection> {
    let start = now + u64::from(cfg.selection_t1_ms);
    let end = now + u64::from(cfg.rri_ms);
    let count = enumerate_csrs(layout, start, end, width).len();
    let tiebreak: Vec<u64> = (0..count).map(|_| rng.next_u64()).collect();
    let out = filter_candidates(record, layout, cfg, now, width, &tiebreak);
    if out.enumerated.is_empty() {
        return None;
    }
    if out.survivors.is_empty() {
        log::debug!("select_csr: no survivors at {now}, uniform fallback");
        let csr = out.enumerated[rng.index(out.enumerated.len())];
        return Some(Selection { csr, survivors: out.enumerated, fallback: true });
    }
    let csr = out.survivors[rng.index(out.survivors.len())];
    Some(Selection { csr, survivors: out.survivors, fallback: false })
}
