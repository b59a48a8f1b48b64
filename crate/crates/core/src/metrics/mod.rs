//! Metric accumulators. Each run owns one set; nothing here is shared.

pub mod output;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::mac::GrantRecord;
use crate::phy::{LossCause, ReceptionOutcome};
use crate::resources::{Csr, ResourceId, Subframe};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub bin_width_m: f64,
    pub max_distance_m: f64,
    /// CBR sampling period after warm-up.
    pub cbr_sample_ms: u32,
    /// Window over which CBR is measured.
    pub cbr_window_ms: u32,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { bin_width_m: 25.0, max_distance_m: 700.0, cbr_sample_ms: 100, cbr_window_ms: 100 }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.bin_width_m > 0.0) {
            return Err(ConfigError::field("metrics.bin_width_m", "must be positive"));
        }
        if !(self.max_distance_m >= self.bin_width_m) {
            return Err(ConfigError::field("metrics.max_distance_m", "must be at least one bin wide"));
        }
        if self.cbr_sample_ms == 0 {
            return Err(ConfigError::field("metrics.cbr_sample_ms", "must be positive"));
        }
        if self.cbr_window_ms == 0 {
            return Err(ConfigError::field("metrics.cbr_window_ms", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BinCounts {
    pub attempted: u64,
    pub decoded: u64,
    pub hd: u64,
    pub sen: u64,
    pub pro: u64,
    pub col: u64,
}

impl BinCounts {
    pub fn losses(&self) -> u64 {
        self.hd + self.sen + self.pro + self.col
    }

    pub fn pdr(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.decoded as f64 / self.attempted as f64)
    }

    pub fn add(&mut self, other: &BinCounts) {
        self.attempted += other.attempted;
        self.decoded += other.decoded;
        self.hd += other.hd;
        self.sen += other.sen;
        self.pro += other.pro;
        self.col += other.col;
    }
}

/// Reception counters by transmitter-receiver distance. Distances at or
/// beyond `max_distance_m` go to a trailing overflow bin.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBins {
    pub bin_width_m: f64,
    pub max_distance_m: f64,
    /// Regular bins followed by the overflow bin.
    pub bins: Vec<BinCounts>,
}

impl DistanceBins {
    pub fn new(bin_width_m: f64, max_distance_m: f64) -> Self {
        let n = (max_distance_m / bin_width_m).ceil() as usize;
        Self { bin_width_m, max_distance_m, bins: vec![BinCounts::default(); n + 1] }
    }

    pub fn bin_index(&self, distance_m: f64) -> usize {
        let regular = self.bins.len() - 1;
        if distance_m >= self.max_distance_m {
            return regular;
        }
        ((distance_m / self.bin_width_m) as usize).min(regular - 1)
    }

    pub fn bin_lo_m(&self, index: usize) -> f64 {
        if index == self.bins.len() - 1 {
            self.max_distance_m
        } else {
            index as f64 * self.bin_width_m
        }
    }

    pub fn record_reception(&mut self, outcome: &ReceptionOutcome) {
        let i = self.bin_index(outcome.distance_m);
        let b = &mut self.bins[i];
        b.attempted += 1;
        match outcome.cause {
            None => b.decoded += 1,
            Some(LossCause::HalfDuplex) => b.hd += 1,
            Some(LossCause::Sensing) => b.sen += 1,
            Some(LossCause::Propagation) => b.pro += 1,
            Some(LossCause::Collision) => b.col += 1,
        }
    }

    pub fn merge(&mut self, other: &DistanceBins) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.add(b);
        }
    }

    /// Totals over the bins whose lower edge lies below `limit_m`.
    pub fn totals_below(&self, limit_m: f64) -> BinCounts {
        let mut t = BinCounts::default();
        for (i, b) in self.bins.iter().enumerate() {
            if self.bin_lo_m(i) < limit_m && i + 1 < self.bins.len() {
                t.add(b);
            }
        }
        t
    }
}

/// Rolling busy-subchannel counts for one vehicle over the last
/// `window` subframes.
#[derive(Debug, Clone)]
pub struct CbrWindow {
    window: usize,
    pssch: Vec<u8>,
    pscch: Vec<u8>,
    pssch_sum: u64,
    pscch_sum: u64,
    filled: usize,
    next: usize,
}

impl CbrWindow {
    pub fn new(window: usize) -> Self {
        Self { window, pssch: vec![0; window], pscch: vec![0; window], pssch_sum: 0, pscch_sum: 0, filled: 0, next: 0 }
    }

    /// Pushes one subframe's busy subchannel counts.
    pub fn push(&mut self, pssch_busy: u8, pscch_busy: u8) {
        self.pssch_sum -= u64::from(self.pssch[self.next]);
        self.pscch_sum -= u64::from(self.pscch[self.next]);
        self.pssch[self.next] = pssch_busy;
        self.pscch[self.next] = pscch_busy;
        self.pssch_sum += u64::from(pssch_busy);
        self.pscch_sum += u64::from(pscch_busy);
        self.next = (self.next + 1) % self.window;
        self.filled = (self.filled + 1).min(self.window);
    }

    /// `(pssch, pscch)` busy ratios, `None` until the window is full.
    pub fn cbr(&self, num_subchannels: u32) -> Option<(f64, f64)> {
        if self.filled < self.window {
            return None;
        }
        let cells = (self.window as u64 * u64::from(num_subchannels)) as f64;
        Some((self.pssch_sum as f64 / cells, self.pscch_sum as f64 / cells))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrSample {
    pub subframe: Subframe,
    pub vehicle: u32,
    pub pssch: f64,
    pub pscch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupancyClass {
    Free,
    Occupied,
    ReservedUnused,
}

impl OccupancyClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Occupied => "occupied",
            Self::ReservedUnused => "reserved_unused",
        }
    }
}

/// After-the-fact class of every cell in `[start, end)`. A cell used by any
/// transmission is occupied, however many vehicles used it and whatever
/// else was reserved there.
#[derive(Debug, Clone)]
pub struct OccupancyLedger {
    start: Subframe,
    end: Subframe,
    num_subchannels: u32,
    cells: Vec<u8>,
}

const FREE: u8 = 0;
const UNUSED: u8 = 1;
const OCCUPIED: u8 = 2;

impl OccupancyLedger {
    pub fn new(start: Subframe, end: Subframe, num_subchannels: u32) -> Self {
        let len = end.saturating_sub(start) as usize * num_subchannels as usize;
        Self { start, end, num_subchannels, cells: vec![FREE; len] }
    }

    fn index(&self, cell: ResourceId) -> Option<usize> {
        (cell.subframe >= self.start && cell.subframe < self.end && cell.subchannel < self.num_subchannels)
            .then(|| (cell.subframe - self.start) as usize * self.num_subchannels as usize + cell.subchannel as usize)
    }

    pub fn mark_occupied(&mut self, csr: &Csr) {
        for cell in csr.cells() {
            if let Some(i) = self.index(cell) {
                self.cells[i] = OCCUPIED;
            }
        }
    }

    pub fn mark_reserved_unused(&mut self, csr: &Csr) {
        for cell in csr.cells() {
            if let Some(i) = self.index(cell) {
                self.cells[i] = self.cells[i].max(UNUSED);
            }
        }
    }

    pub fn class(&self, cell: ResourceId) -> Option<OccupancyClass> {
        self.index(cell).map(|i| match self.cells[i] {
            FREE => OccupancyClass::Free,
            UNUSED => OccupancyClass::ReservedUnused,
            _ => OccupancyClass::Occupied,
        })
    }

    pub fn counts(&self) -> [(OccupancyClass, u64); 3] {
        let mut c = [0u64; 3];
        for &v in &self.cells {
            c[v as usize] += 1;
        }
        [
            (OccupancyClass::Free, c[0]),
            (OccupancyClass::Occupied, c[2]),
            (OccupancyClass::ReservedUnused, c[1]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancyRow {
    pub class: OccupancyClass,
    pub count: u64,
    pub pct: f64,
}

/// Class counts with percentages of all cells.
pub fn occupancy_report(ledger: &OccupancyLedger) -> Vec<OccupancyRow> {
    let counts = ledger.counts();
    let total: u64 = counts.iter().map(|c| c.1).sum();
    counts
        .iter()
        .map(|&(class, count)| OccupancyRow {
            class,
            count,
            pct: if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 },
        })
        .collect()
}

/// Grant lifecycle records tagged with the traffic model that produced them.
#[derive(Debug, Clone, Default)]
pub struct GrantStats {
    pub records: Vec<(String, GrantRecord)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrantSummary {
    pub model: String,
    pub grants: usize,
    pub mean_length: f64,
    pub std_length: f64,
    pub mean_used: f64,
    pub std_used: f64,
    pub broken_pct: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One summary row per traffic model, in first-seen order.
pub fn grant_summary(stats: &GrantStats) -> Vec<GrantSummary> {
    let mut models: Vec<&str> = Vec::new();
    for (m, _) in &stats.records {
        if !models.contains(&m.as_str()) {
            models.push(m);
        }
    }
    models
        .into_iter()
        .map(|model| {
            let recs: Vec<&GrantRecord> = stats.records.iter().filter(|(m, _)| m == model).map(|(_, r)| r).collect();
            let (mean_length, std_length) = mean_std(recs.iter().map(|r| f64::from(r.length)));
            let (mean_used, std_used) = mean_std(recs.iter().map(|r| f64::from(r.used)));
            let broken = recs.iter().filter(|r| r.broken).count();
            GrantSummary {
                model: model.to_string(),
                grants: recs.len(),
                mean_length,
                std_length,
                mean_used,
                std_used,
                broken_pct: 100.0 * broken as f64 / recs.len() as f64,
            }
        })
        .collect()
}
