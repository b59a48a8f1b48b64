//! CSV and JSON result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::metrics::{CbrSample, DistanceBins, GrantStats, OccupancyRow};

pub const PDR_FILE: &str = "pdr_by_distance.csv";
pub const CBR_FILE: &str = "cbr_timeseries.csv";
pub const GRANTS_FILE: &str = "grants.csv";
pub const OCCUPANCY_FILE: &str = "occupancy.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RECEPTIONS_FILE: &str = "receptions.csv";

#[derive(Serialize)]
struct PdrRow {
    bin_lo_m: f64,
    attempted: u64,
    decoded: u64,
    hd: u64,
    sen: u64,
    pro: u64,
    col: u64,
}

#[derive(Serialize)]
struct CbrRow {
    subframe: u64,
    vehicle: u32,
    pssch_cbr: f64,
    pscch_cbr: f64,
}

#[derive(Serialize)]
struct GrantRow<'a> {
    model: &'a str,
    length: u32,
    used: u32,
    broken: u8,
}

#[derive(Serialize)]
struct OccupancyCsvRow {
    class: &'static str,
    count: u64,
    pct: f64,
}

/// One decode verdict, for the debug dump.
#[derive(Debug, Clone, Serialize)]
pub struct ReceptionRow {
    pub subframe: u64,
    pub tx: u32,
    pub rx: u32,
    pub distance_m: f64,
    pub sinr_db: f64,
    pub verdict: &'static str,
    pub cause: &'static str,
}

/// Writes the header even when there are no rows.
fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |source| SimError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

pub fn write_pdr(path: &Path, bins: &DistanceBins) -> Result<()> {
    write_rows(
        path,
        &["bin_lo_m", "attempted", "decoded", "hd", "sen", "pro", "col"],
        bins.bins.iter().enumerate().map(|(i, b)| PdrRow {
            bin_lo_m: bins.bin_lo_m(i),
            attempted: b.attempted,
            decoded: b.decoded,
            hd: b.hd,
            sen: b.sen,
            pro: b.pro,
            col: b.col,
        }),
    )
}

pub fn write_cbr(path: &Path, samples: &[CbrSample]) -> Result<()> {
    write_rows(
        path,
        &["subframe", "vehicle", "pssch_cbr", "pscch_cbr"],
        samples.iter().map(|s| CbrRow { subframe: s.subframe, vehicle: s.vehicle, pssch_cbr: s.pssch, pscch_cbr: s.pscch }),
    )
}

pub fn write_grants(path: &Path, stats: &GrantStats) -> Result<()> {
    write_rows(
        path,
        &["model", "length", "used", "broken"],
        stats.records.iter().map(|(m, r)| GrantRow { model: m, length: r.length, used: r.used, broken: u8::from(r.broken) }),
    )
}

pub fn write_occupancy(path: &Path, rows: &[OccupancyRow]) -> Result<()> {
    write_rows(path, &["class", "count", "pct"], rows.iter().map(|r| OccupancyCsvRow { class: r.class.label(), count: r.count, pct: r.pct }))
}

pub fn write_receptions(path: &Path, rows: &[ReceptionRow]) -> Result<()> {
    write_rows(path, &["subframe", "tx", "rx", "distance_m", "sinr_db", "verdict", "cause"], rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| SimError::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| SimError::io(path, e))?;
    w.flush().map_err(|e| SimError::io(path, e))
}
