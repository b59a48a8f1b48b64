//! Synthetic ring-road highway.
//!
//! Vehicles keep their lane and drive at a density-dependent mean speed
//! with a small, bounded, mean-reverting jitter on top. The mean speed is
//! calibrated so that a 4 m position rule fires at the CAM intervals
//! observed on real highways at each density.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::resources::VehicleId;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadConfig {
    pub length_m: f64,
    pub lanes_per_direction: u32,
    pub lane_width_m: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self { length_m: 2000.0, lanes_per_direction: 3, lane_width_m: 4.0 }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return Err(ConfigError::field("road.length_m", "must be positive"));
        }
        if self.lanes_per_direction == 0 {
            return Err(ConfigError::field("road.lanes_per_direction", "must be positive"));
        }
        if !(self.lane_width_m > 0.0) {
            return Err(ConfigError::field("road.lane_width_m", "must be positive"));
        }
        Ok(())
    }

    pub fn total_lanes(&self) -> u32 {
        2 * self.lanes_per_direction
    }

    /// Lateral offset of a lane's centre line.
    pub fn lane_y(&self, lane: u32) -> f64 {
        (f64::from(lane) + 0.5) * self.lane_width_m
    }

    /// Euclidean distance between two points given by ring coordinate and
    /// lane, taking the shorter way round the ring.
    pub fn distance(&self, x1: f64, lane1: u32, x2: f64, lane2: u32) -> f64 {
        let mut dx = (x1 - x2).abs() % self.length_m;
        if dx > self.length_m / 2.0 {
            dx = self.length_m - dx;
        }
        let dy = self.lane_y(lane1) - self.lane_y(lane2);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    /// Overrides the calibrated mean speed when set.
    pub mean_speed_mps: Option<f64>,
    /// Bound on the deviation from the mean speed.
    pub jitter_bound_mps: f64,
    /// Diffusion of the deviation, m/s per sqrt(s).
    pub jitter_sigma: f64,
    /// Mean-reversion rate in 1/s.
    pub reversion_per_s: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self { mean_speed_mps: None, jitter_bound_mps: 0.2, jitter_sigma: 0.15, reversion_per_s: 1.0 }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(v) = self.mean_speed_mps {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::field("mobility.mean_speed_mps", "must be a non-negative speed"));
            }
        }
        if !(self.jitter_bound_mps >= 0.0) {
            return Err(ConfigError::field("mobility.jitter_bound_mps", "must be non-negative"));
        }
        if !(self.jitter_sigma >= 0.0) {
            return Err(ConfigError::field("mobility.jitter_sigma", "must be non-negative"));
        }
        if !(self.reversion_per_s >= 0.0) {
            return Err(ConfigError::field("mobility.reversion_per_s", "must be non-negative"));
        }
        Ok(())
    }
}

/// Observed mean CAM intervals (ms) at the headline densities (veh/m).
const CAM_CALIBRATION: [(f64, f64); 4] = [(0.06, 122.0), (0.12, 250.0), (0.2, 384.0), (0.3, 610.0)];

/// Target CAM interval at a density, interpolated linearly between the
/// calibration points and clamped outside them.
pub fn target_cam_interval_ms(density: f64) -> f64 {
    let pts = &CAM_CALIBRATION;
    if density <= pts[0].0 {
        return pts[0].1;
    }
    for w in pts.windows(2) {
        let ((d0, t0), (d1, t1)) = (w[0], w[1]);
        if density <= d1 {
            return t0 + (t1 - t0) * (density - d0) / (d1 - d0);
        }
    }
    pts[pts.len() - 1].1
}

/// Mean speed at which a 4 m displacement takes the target CAM interval.
pub fn calibrated_speed_mps(density: f64) -> f64 {
    4.0 / (target_cam_interval_ms(density) / 1000.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    /// Ring coordinate in `[0, length)`.
    pub position_m: f64,
    pub lane: u32,
    pub speed_mps: f64,
    pub heading_deg: f64,
    /// Total distance driven; used for displacement tests.
    pub odometer_m: f64,
    pub mean_speed_mps: f64,
}

impl VehicleState {
    fn direction(&self) -> f64 {
        if self.heading_deg == 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn vehicle_count(density: f64, road: &RoadConfig) -> usize {
    (density * road.length_m).round() as usize
}

/// Places `round(density * length)` vehicles, lanes round-robin, positions
/// uniform on the ring. Lanes below `lanes_per_direction` drive forward.
pub fn place_vehicles(density: f64, road: &RoadConfig, mean_speed_mps: f64, rng: &mut RngStream) -> Vec<VehicleState> {
    let n = vehicle_count(density, road);
    (0..n)
        .map(|i| {
            let lane = i as u32 % road.total_lanes();
            let heading_deg = if lane < road.lanes_per_direction { 0.0 } else { 180.0 };
            VehicleState {
                id: VehicleId(i as u32),
                position_m: rng.unit() * road.length_m,
                lane,
                speed_mps: mean_speed_mps,
                heading_deg,
                odometer_m: 0.0,
                mean_speed_mps,
            }
        })
        .collect()
}

/// Advances one vehicle by `dt_s` seconds.
pub fn mobility_step(v: &mut VehicleState, dt_s: f64, road: &RoadConfig, cfg: &MobilityConfig, rng: &mut RngStream) {
    let step = v.speed_mps * dt_s;
    v.odometer_m += step;
    v.position_m = (v.position_m + v.direction() * step).rem_euclid(road.length_m);

    if cfg.jitter_sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng.raw());
        let dev = v.speed_mps - v.mean_speed_mps;
        let dev = dev * (1.0 - cfg.reversion_per_s * dt_s) + cfg.jitter_sigma * dt_s.sqrt() * z;
        let dev = dev.clamp(-cfg.jitter_bound_mps, cfg.jitter_bound_mps);
        v.speed_mps = (v.mean_speed_mps + dev).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamId, MOBILITY, PLACEMENT};

    #[test]
    fn headline_counts() {
        let road = RoadConfig::default();
        assert_eq!(vehicle_count(0.06, &road), 120);
        assert_eq!(vehicle_count(0.12, &road), 240);
        assert_eq!(vehicle_count(0.2, &road), 400);
        assert_eq!(vehicle_count(0.3, &road), 600);
    }

    #[test]
    fn lanes_are_balanced() {
        let road = RoadConfig::default();
        let mut rng = RngStream::new(3, StreamId::global(PLACEMENT));
        let vs = place_vehicles(0.12, &road, 16.0, &mut rng);
        for lane in 0..6 {
            let n = vs.iter().filter(|v| v.lane == lane).count() as f64;
            assert!((n - 40.0).abs() <= 4.0);
        }
        assert!(vs.iter().all(|v| (0.0..2000.0).contains(&v.position_m)));
    }

    #[test]
    fn calibration_speeds() {
        assert!((calibrated_speed_mps(0.06) - 32.79).abs() < 0.01);
        assert!((calibrated_speed_mps(0.12) - 16.0).abs() < 1e-12);
        assert!((calibrated_speed_mps(0.3) - 6.557).abs() < 0.001);
        assert!((target_cam_interval_ms(0.09) - 186.0).abs() < 1e-9);
    }

    #[test]
    fn ring_distance_wraps() {
        let road = RoadConfig::default();
        assert!((road.distance(10.0, 0, 1990.0, 0) - 20.0).abs() < 1e-9);
        assert!((road.distance(0.0, 0, 0.0, 5) - 20.0).abs() < 1e-9);
        assert!((road.distance(0.0, 0, 30.0, 1) - 30.0f64.hypot(4.0)).abs() < 1e-9);
    }

    #[test]
    fn speed_stays_bounded_and_positive() {
        let road = RoadConfig::default();
        let cfg = MobilityConfig::default();
        let mut rng = RngStream::new(3, StreamId::indexed(MOBILITY, 1));
        let mut v = place_vehicles(0.3, &road, 0.1, &mut rng).remove(0);
        v.mean_speed_mps = 0.1;
        for _ in 0..1_000_000 {
            mobility_step(&mut v, 0.001, &road, &cfg, &mut rng);
            assert!(v.speed_mps >= 0.0);
            assert!((v.speed_mps - 0.1).abs() <= 0.2 + 1e-12);
        }
    }
}
