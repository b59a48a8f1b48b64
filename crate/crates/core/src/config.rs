//! Scenario description, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result, SimError};
use crate::mac::SpsConfig;
use crate::metrics::MetricsConfig;
use crate::mobility::{MobilityConfig, RoadConfig};
use crate::phy::PhyConfig;
use crate::resources::ChannelLayout;
use crate::sched::{CounterConfig, SchedulerVariant, StrConfig};
use crate::traffic::TrafficModel;

/// A share of the vehicles with one traffic model and one scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficClass {
    pub name: String,
    pub fraction: f64,
    pub scheduler: SchedulerVariant,
    #[serde(default = "default_payload")]
    pub payload_bytes: u32,
    #[serde(flatten)]
    pub model: TrafficModel,
}

fn default_payload() -> u32 {
    190
}

impl TrafficClass {
    pub fn new(name: &str, model: TrafficModel, scheduler: SchedulerVariant, fraction: f64) -> Self {
        Self { name: name.to_string(), fraction, scheduler, payload_bytes: 190, model }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Also dump every decode verdict to `receptions.csv`.
    pub debug_receptions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub master_seed: u64,
    /// Measured time after warm-up.
    pub duration_s: f64,
    pub warmup_s: f64,
    /// Vehicles per metre of road.
    pub density: f64,
    pub road: RoadConfig,
    pub mobility: MobilityConfig,
    pub layout: ChannelLayout,
    pub phy: PhyConfig,
    pub sps: SpsConfig,
    pub traffic: Vec<TrafficClass>,
    /// Deferred reporting and relinquish-on-conflict for SB-SPS vehicles.
    pub coexistence_fix: bool,
    pub metrics: MetricsConfig,
    pub str: StrConfig,
    pub counter: CounterConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            duration_s: 30.0,
            warmup_s: 10.0,
            density: 0.12,
            road: RoadConfig::default(),
            mobility: MobilityConfig::default(),
            layout: ChannelLayout::default(),
            phy: PhyConfig::default(),
            sps: SpsConfig::default(),
            traffic: vec![TrafficClass::new("periodic", TrafficModel::periodic(), SchedulerVariant::Sbsps, 1.0)],
            coexistence_fix: false,
            metrics: MetricsConfig::default(),
            str: StrConfig::default(),
            counter: CounterConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| SimError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn warmup_subframes(&self) -> u64 {
        (self.warmup_s * 1000.0).round() as u64
    }

    pub fn total_subframes(&self) -> u64 {
        self.warmup_subframes() + (self.duration_s * 1000.0).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(ConfigError::field("duration_s", "must be positive"));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s.is_finite()) {
            return Err(ConfigError::field("warmup_s", "must be non-negative"));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(ConfigError::field("density", "must be positive"));
        }
        self.road.validate()?;
        self.mobility.validate()?;
        self.layout.validate()?;
        self.phy.validate()?;
        self.sps.validate()?;
        self.metrics.validate()?;
        self.str.validate()?;
        self.counter.validate()?;
        if self.traffic.is_empty() {
            return Err(ConfigError::field("traffic", "at least one traffic class is required"));
        }
        let mut sum = 0.0;
        for (i, class) in self.traffic.iter().enumerate() {
            let field = format!("traffic[{i}]");
            if !(class.fraction >= 0.0 && class.fraction <= 1.0) {
                return Err(ConfigError::field(format!("{field}.fraction"), "must lie in [0, 1]"));
            }
            sum += class.fraction;
            class.model.validate(&field)?;
            self.layout
                .tb_entry(class.payload_bytes, self.phy.mcs)
                .map_err(|e| ConfigError::field(format!("{field}.payload_bytes"), e.message))?;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ConfigError::field("traffic.fraction", format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Per-vehicle class index for `n` vehicles: counts by largest
    /// remainder, classes laid out in order.
    pub fn class_counts(&self, n: usize) -> Vec<usize> {
        let exact: Vec<f64> = self.traffic.iter().map(|c| c.fraction * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}
