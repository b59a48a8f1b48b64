//! Link budget and reception model.
//!
//! Power is tracked per resource block: a transmission's received power is
//! spread evenly over the RBs it occupies, and every measurement (PSSCH-RSRP,
//! S-RSSI, SINR) is derived from those per-RB contributions plus thermal
//! noise scaled to the measured bandwidth.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::resources::{RB_BANDWIDTH_HZ, RES_PER_RB};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Free-space loss at `distance_m` for a carrier in GHz.
pub fn friis_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    let freq = carrier_ghz * 1e9;
    20.0 * (4.0 * std::f64::consts::PI * distance_m * freq / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathlossModel {
    /// `pl0_db + 10 n log10(d / d0)`.
    LogDistance { pl0_db: f64, exponent: f64, ref_distance_m: f64 },
    /// `a log10(d) + b + c log10(fc / 5 GHz)`; coefficients come from the
    /// scenario.
    WinnerB1 { a: f64, b: f64, c: f64 },
}

impl PathlossModel {
    /// Log-distance anchored at the free-space loss at 1 m.
    pub fn log_distance_for(carrier_ghz: f64, exponent: f64) -> Self {
        Self::LogDistance { pl0_db: friis_db(1.0, carrier_ghz), exponent, ref_distance_m: 1.0 }
    }
}

impl Default for PathlossModel {
    fn default() -> Self {
        Self::log_distance_for(5.9, 2.75)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlerMode {
    Logistic,
    /// Step at `s50`: certain loss below, certain decode above.
    HardThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlerCurve {
    pub mcs: u32,
    pub s50_db: f64,
    pub slope_per_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlerTable {
    pub mode: BlerMode,
    pub curves: Vec<BlerCurve>,
}

impl Default for BlerTable {
    fn default() -> Self {
        Self {
            mode: BlerMode::Logistic,
            curves: vec![
                BlerCurve { mcs: 6, s50_db: 1.5, slope_per_db: 2.0 },
                BlerCurve { mcs: 7, s50_db: 2.5, slope_per_db: 2.0 },
                BlerCurve { mcs: 9, s50_db: 5.5, slope_per_db: 2.0 },
            ],
        }
    }
}

impl BlerTable {
    pub fn curve(&self, mcs: u32) -> Result<&BlerCurve, ConfigError> {
        self.curves
            .iter()
            .find(|c| c.mcs == mcs)
            .ok_or_else(|| ConfigError::field("phy.bler.curves", format!("no BLER curve for MCS {mcs}")))
    }

    /// Block error probability for a mean SINR.
    pub fn bler(&self, sinr_db: f64, mcs: u32) -> Result<f64, ConfigError> {
        let c = self.curve(mcs)?;
        Ok(match self.mode {
            BlerMode::Logistic => logistic_bler(sinr_db, c.s50_db, c.slope_per_db),
            BlerMode::HardThreshold => {
                if sinr_db < c.s50_db {
                    1.0
                } else if sinr_db > c.s50_db {
                    0.0
                } else {
                    0.5
                }
            }
        })
    }
}

fn logistic_bler(sinr_db: f64, s50_db: f64, slope: f64) -> f64 {
    let x = slope * (sinr_db - s50_db);
    // exp overflow guard; the limits are exact at f64 precision.
    if x > 700.0 {
        0.0
    } else if x < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub thermal_noise_density_dbm_hz: f64,
    pub shadowing_sigma_los_db: f64,
    pub sensing_threshold_dbm: f64,
    /// S-RSSI level above which a subchannel counts as busy for CBR.
    pub cbr_threshold_dbm: f64,
    pub carrier_ghz: f64,
    pub min_distance_m: f64,
    pub mcs: u32,
    pub pathloss: PathlossModel,
    pub bler: BlerTable,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            noise_figure_db: 9.0,
            thermal_noise_density_dbm_hz: -174.0,
            shadowing_sigma_los_db: 3f64.sqrt(),
            sensing_threshold_dbm: -90.5,
            cbr_threshold_dbm: -90.0,
            carrier_ghz: 5.9,
            min_distance_m: 1.0,
            mcs: 6,
            pathloss: PathlossModel::default(),
            bler: BlerTable::default(),
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(10.0..=23.0).contains(&self.tx_power_dbm) {
            return Err(ConfigError::field("phy.tx_power_dbm", "must lie in [10, 23] dBm"));
        }
        if !self.sensing_threshold_dbm.is_finite() {
            return Err(ConfigError::field("phy.sensing_threshold_dbm", "must be finite"));
        }
        if !self.cbr_threshold_dbm.is_finite() {
            return Err(ConfigError::field("phy.cbr_threshold_dbm", "must be finite"));
        }
        if !(self.shadowing_sigma_los_db >= 0.0) {
            return Err(ConfigError::field("phy.shadowing_sigma_los_db", "must be non-negative"));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(ConfigError::field("phy.min_distance_m", "must be positive"));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(ConfigError::field("phy.carrier_ghz", "must be positive"));
        }
        match self.pathloss {
            PathlossModel::LogDistance { exponent, ref_distance_m, .. } => {
                if !(exponent > 0.0) || !(ref_distance_m > 0.0) {
                    return Err(ConfigError::field(
                        "phy.pathloss",
                        "log-distance needs positive exponent and reference distance",
                    ));
                }
            }
            PathlossModel::WinnerB1 { a, .. } => {
                if !(a > 0.0) {
                    return Err(ConfigError::field("phy.pathloss.a", "distance slope must be positive"));
                }
            }
        }
        for c in &self.bler.curves {
            if !(c.slope_per_db > 0.0) {
                return Err(ConfigError::field(
                    "phy.bler.curves.slope_per_db",
                    format!("MCS {} slope must be positive", c.mcs),
                ));
            }
        }
        self.bler.curve(self.mcs)?;
        Ok(())
    }

    /// Thermal noise plus noise figure over `rb_count` RBs, in mW.
    pub fn noise_mw(&self, rb_count: u32) -> f64 {
        dbm_to_mw(self.noise_dbm(rb_count))
    }

    pub fn noise_dbm(&self, rb_count: u32) -> f64 {
        self.thermal_noise_density_dbm_hz
            + 10.0 * (f64::from(rb_count) * RB_BANDWIDTH_HZ).log10()
            + self.noise_figure_db
    }
}

/// Deterministic pathloss. Distances below the configured minimum are
/// clamped to it.
pub fn pathloss_db(distance_m: f64, model: &PathlossModel, carrier_ghz: f64, min_distance_m: f64) -> f64 {
    let d = distance_m.max(min_distance_m);
    match *model {
        PathlossModel::LogDistance { pl0_db, exponent, ref_distance_m } => {
            pl0_db + 10.0 * exponent * (d / ref_distance_m).log10()
        }
        PathlossModel::WinnerB1 { a, b, c } => a * d.log10() + b + c * (carrier_ghz / 5.0).log10(),
    }
}

/// One transmitter-receiver realisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub distance_m: f64,
    pub pathloss_db: f64,
    pub shadowing_db: f64,
    pub rx_power_total_dbm: f64,
}

impl LinkSample {
    pub fn new(tx_power_dbm: f64, distance_m: f64, pathloss_db: f64, shadowing_db: f64) -> Self {
        Self {
            distance_m,
            pathloss_db,
            shadowing_db,
            rx_power_total_dbm: tx_power_dbm - pathloss_db - shadowing_db,
        }
    }
}

/// Received power spread evenly over the RBs of one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbPower {
    /// Linear mW per RB.
    pub per_rb_mw: f64,
    pub rb_count: u32,
}

impl RbPower {
    pub fn total_mw(&self) -> f64 {
        self.per_rb_mw * f64::from(self.rb_count)
    }

    pub fn per_rb_dbm(&self) -> f64 {
        mw_to_dbm(self.per_rb_mw)
    }

    /// Power spectral density in mW/Hz.
    pub fn psd_mw_per_hz(&self) -> f64 {
        self.per_rb_mw / RB_BANDWIDTH_HZ
    }
}

/// Splits the total received power of a link over `rb_count` RBs.
pub fn received_power(link: &LinkSample, rb_count: u32) -> RbPower {
    assert!(rb_count >= 1, "received_power needs at least one RB");
    RbPower { per_rb_mw: dbm_to_mw(link.rx_power_total_dbm) / f64::from(rb_count), rb_count }
}

/// PSSCH-RSRP: power per resource element under a flat PSD within the RB.
pub fn pssch_rsrp(rb: &RbPower) -> f64 {
    let per_re_mw = rb.psd_mw_per_hz() * (RB_BANDWIDTH_HZ / RES_PER_RB);
    mw_to_dbm(per_re_mw)
}

/// A power source seen over part of the measured band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandContribution {
    pub power: RbPower,
    /// RBs of this source that fall inside the measured band.
    pub overlapping_rbs: u32,
}

/// S-RSSI over `measured_rbs` RBs: every co-channel source plus noise,
/// summed linearly.
pub fn s_rssi(contributions: &[BandContribution], measured_rbs: u32, phy: &PhyConfig) -> f64 {
    let signal: f64 = contributions
        .iter()
        .map(|c| c.power.per_rb_mw * f64::from(c.overlapping_rbs.min(c.power.rb_count)))
        .sum();
    mw_to_dbm(signal + phy.noise_mw(measured_rbs))
}

/// A transmission occupying the RB span `[rb_start, rb_start + power.rb_count)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedPower {
    pub power: RbPower,
    pub rb_start: u32,
}

impl PlacedPower {
    pub fn rb_end(&self) -> u32 {
        self.rb_start + self.power.rb_count
    }

    pub fn covers(&self, rb: u32) -> bool {
        rb >= self.rb_start && rb < self.rb_end()
    }

    pub fn overlap(&self, start: u32, end: u32) -> u32 {
        let lo = self.rb_start.max(start);
        let hi = self.rb_end().min(end);
        hi.saturating_sub(lo)
    }
}

/// Mean SINR over the signal's RBs.
///
/// Per RB the interference is the per-RB power of every interferer covering
/// that RB; noise is one RB's worth. The per-RB ratios are averaged linearly.
pub fn sinr_mean_db(signal: &PlacedPower, interferers: &[PlacedPower], noise_per_rb_mw: f64) -> f64 {
    let n = signal.power.rb_count;
    let mut acc = 0.0;
    for rb in signal.rb_start..signal.rb_end() {
        let interference: f64 = interferers.iter().filter(|i| i.covers(rb)).map(|i| i.power.per_rb_mw).sum();
        acc += signal.power.per_rb_mw / (interference + noise_per_rb_mw);
    }
    10.0 * (acc / f64::from(n)).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossCause {
    /// Receiver was transmitting in the same subframe.
    HalfDuplex,
    /// Received power below the sensing threshold.
    Sensing,
    /// Insufficient SNR.
    Propagation,
    /// Interference on overlapping RBs.
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionOutcome {
    /// `None` when decoded.
    pub cause: Option<LossCause>,
    pub sinr_mean_db: f64,
    pub distance_m: f64,
}

impl ReceptionOutcome {
    pub fn decoded(&self) -> bool {
        self.cause.is_none()
    }
}

/// Everything the decoder needs about one reception in the current subframe.
#[derive(Debug, Clone, Copy)]
pub struct DecodeInput<'a> {
    pub link: &'a LinkSample,
    pub signal: PlacedPower,
    pub interferers: &'a [PlacedPower],
    pub receiver_transmitting: bool,
    pub mcs: u32,
}

/// Decode verdict with a single loss cause, checked in the order
/// half-duplex, sensing, propagation, collision. `u1` and `u2` are
/// independent uniforms; SCI and TB share the verdict.
pub fn decode(input: &DecodeInput<'_>, phy: &PhyConfig, u1: f64, u2: f64) -> Result<ReceptionOutcome, ConfigError> {
    let noise_rb = phy.noise_mw(1);
    let sinr = sinr_mean_db(&input.signal, input.interferers, noise_rb);
    let outcome = |cause| ReceptionOutcome { cause, sinr_mean_db: sinr, distance_m: input.link.distance_m };
    if input.receiver_transmitting {
        return Ok(outcome(Some(LossCause::HalfDuplex)));
    }
    if input.link.rx_power_total_dbm < phy.sensing_threshold_dbm {
        return Ok(outcome(Some(LossCause::Sensing)));
    }
    let snr = sinr_mean_db(&input.signal, &[], noise_rb);
    if u1 < phy.bler.bler(snr, input.mcs)? {
        return Ok(outcome(Some(LossCause::Propagation)));
    }
    if u2 < phy.bler.bler(sinr, input.mcs)? {
        return Ok(outcome(Some(LossCause::Collision)));
    }
    Ok(outcome(None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placed(total_dbm: f64, rb_start: u32, rb_count: u32) -> PlacedPower {
        PlacedPower { power: RbPower { per_rb_mw: dbm_to_mw(total_dbm) / f64::from(rb_count), rb_count }, rb_start }
    }

    #[test]
    fn friis_anchor_at_5_9_ghz() {
        assert!((friis_db(1.0, 5.9) - 47.86).abs() < 0.01);
    }

    #[test]
    fn log_distance_points() {
        let m = PathlossModel::LogDistance { pl0_db: 47.86, exponent: 2.75, ref_distance_m: 1.0 };
        assert!((pathloss_db(1.0, &m, 5.9, 1.0) - 47.86).abs() < 1e-12);
        let step = pathloss_db(200.0, &m, 5.9, 1.0) - pathloss_db(100.0, &m, 5.9, 1.0);
        assert!((step - 27.5 * 2f64.log10()).abs() < 1e-9);
        // zero distance clamps
        assert_eq!(pathloss_db(0.0, &m, 5.9, 1.0), pathloss_db(1.0, &m, 5.9, 1.0));
        let rx = 10.0 - pathloss_db(500.0, &PathlossModel::default(), 5.9, 1.0);
        assert!(rx < -90.5, "{rx}");
    }

    #[test]
    fn winner_b1_uses_configured_coefficients() {
        let m = PathlossModel::WinnerB1 { a: 22.7, b: 41.0, c: 20.0 };
        let expected = 22.7 * 2.0 + 41.0 + 20.0 * (5.9f64 / 5.0).log10();
        assert!((pathloss_db(100.0, &m, 5.9, 1.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn per_rb_split() {
        let link = LinkSample::new(0.0, 10.0, 80.0, 0.0);
        assert!((received_power(&link, 1).per_rb_dbm() + 80.0).abs() < 1e-9);
        assert!((received_power(&link, 10).per_rb_dbm() + 90.0).abs() < 1e-9);
        let p = received_power(&link, 14);
        let sum: f64 = (0..14).map(|_| p.per_rb_mw).sum();
        let total = dbm_to_mw(-80.0);
        assert!(((sum - total) / total).abs() < 1e-9);
    }

    #[test]
    fn rsrp_is_power_per_re() {
        let rb = RbPower { per_rb_mw: dbm_to_mw(-90.0), rb_count: 1 };
        assert!((pssch_rsrp(&rb) - (-90.0 - 10.0 * 12f64.log10())).abs() < 1e-9);
        assert!((pssch_rsrp(&rb) + 100.79).abs() < 0.005);
        let doubled = RbPower { per_rb_mw: 2.0 * rb.per_rb_mw, rb_count: 1 };
        assert!((pssch_rsrp(&doubled) - pssch_rsrp(&rb) - 3.0103).abs() < 1e-3);
    }

    #[test]
    fn s_rssi_cases() {
        let phy = PhyConfig::default();
        let floor = s_rssi(&[], 16, &phy);
        let expected = -174.0 + 10.0 * (16.0 * 180e3f64).log10() + 9.0;
        assert!((floor - expected).abs() < 1e-9);

        let strong = BandContribution { power: RbPower { per_rb_mw: dbm_to_mw(-50.0) / 16.0, rb_count: 16 }, overlapping_rbs: 16 };
        assert!((s_rssi(&[strong], 16, &phy) + 50.0).abs() < 0.1);
        let two = s_rssi(&[strong, strong], 16, &phy) - s_rssi(&[strong], 16, &phy);
        assert!((two - 3.0103).abs() < 0.01);
    }

    #[test]
    fn sinr_cases() {
        let noise = dbm_to_mw(-100.0);
        let sig = PlacedPower { power: RbPower { per_rb_mw: dbm_to_mw(-80.0), rb_count: 10 }, rb_start: 0 };
        assert!((sinr_mean_db(&sig, &[], noise) - 20.0).abs() < 1e-6);

        let tiny = 1e-30;
        let equal = PlacedPower { rb_start: 0, ..sig };
        assert!(sinr_mean_db(&sig, &[equal], tiny).abs() < 1e-3);

        // half-overlapping interferer: brute-force per-RB average
        let half = PlacedPower { rb_start: 5, ..sig };
        let got = sinr_mean_db(&sig, &[half], noise);
        let s = sig.power.per_rb_mw;
        let brute = (5.0 * s / noise + 5.0 * s / (s + noise)) / 10.0;
        assert!((got - 10.0 * brute.log10()).abs() < 1e-9);
        let full = sinr_mean_db(&sig, &[equal], noise);
        let none = sinr_mean_db(&sig, &[], noise);
        assert!(full < got && got < none);
    }

    #[test]
    fn bler_curve_shape() {
        let t = BlerTable::default();
        assert!(t.bler(40.0, 6).unwrap() <= 1e-3);
        assert!(t.bler(-20.0, 6).unwrap() >= 0.999);
        assert!((t.bler(1.5, 6).unwrap() - 0.5).abs() < 1e-6);
        assert!((t.bler(5.5, 9).unwrap() - 0.5).abs() < 1e-6);
        assert!(t.bler(0.0, 4).is_err());
        let hard = BlerTable { mode: BlerMode::HardThreshold, ..BlerTable::default() };
        assert_eq!(hard.bler(1.4, 6).unwrap(), 1.0);
        assert_eq!(hard.bler(1.6, 6).unwrap(), 0.0);
    }

    fn decode_case(rx_dbm: f64, interferers: &[PlacedPower], hd: bool, u1: f64, u2: f64) -> ReceptionOutcome {
        let phy = PhyConfig::default();
        let link = LinkSample::new(23.0, 100.0, 23.0 - rx_dbm, 0.0);
        let signal = PlacedPower { power: received_power(&link, 16), rb_start: 0 };
        decode(
            &DecodeInput { link: &link, signal, interferers, receiver_transmitting: hd, mcs: 6 },
            &phy,
            u1,
            u2,
        )
        .unwrap()
    }

    #[test]
    fn decode_precedence() {
        assert_eq!(decode_case(-40.0, &[], true, 0.9, 0.9).cause, Some(LossCause::HalfDuplex));
        assert_eq!(decode_case(-95.0, &[], false, 0.9, 0.9).cause, Some(LossCause::Sensing));
        assert!(decode_case(-60.0, &[], false, 0.5, 0.5).decoded());
        let jam = placed(-60.0, 0, 16);
        assert_eq!(decode_case(-60.0, &[jam], false, 0.9, 0.1).cause, Some(LossCause::Collision));
    }

    #[test]
    fn propagation_threshold_at_midpoint() {
        // Signal placed so the mean SNR sits exactly at the MCS 6 midpoint.
        let mut phy = PhyConfig::default();
        phy.sensing_threshold_dbm = -200.0;
        let per_rb_dbm = phy.noise_dbm(1) + 1.5;
        let total = per_rb_dbm + 10.0 * 16f64.log10();
        let link = LinkSample::new(23.0, 100.0, 23.0 - total, 0.0);
        let signal = PlacedPower { power: received_power(&link, 16), rb_start: 0 };
        let input = DecodeInput { link: &link, signal, interferers: &[], receiver_transmitting: false, mcs: 6 };
        assert_eq!(decode(&input, &phy, 0.4, 0.99).unwrap().cause, Some(LossCause::Propagation));
        assert!(decode(&input, &phy, 0.6, 0.99).unwrap().decoded());
    }

    #[test]
    fn near_field_decodes() {
        let phy = PhyConfig::default();
        let pl = pathloss_db(49.0, &phy.pathloss, phy.carrier_ghz, phy.min_distance_m);
        // worst case +4 sigma shadowing
        let link = LinkSample::new(23.0, 49.0, pl, 4.0 * phy.shadowing_sigma_los_db);
        let signal = PlacedPower { power: received_power(&link, 16), rb_start: 0 };
        let input = DecodeInput { link: &link, signal, interferers: &[], receiver_transmitting: false, mcs: 6 };
        let snr = sinr_mean_db(&signal, &[], phy.noise_mw(1));
        assert!(phy.bler.bler(snr, 6).unwrap() < 0.01);
        assert!(decode(&input, &phy, 0.02, 0.02).unwrap().decoded());
    }
}
