//! Deterministic subframe-level simulator of the LTE-V2X (C-V2X) Mode 4
//! sidelink.
//!
//! Vehicles on a ring-road highway generate periodic or aperiodic CAM
//! traffic and schedule it with sensing-based semi-persistent scheduling or
//! one of several per-packet alternatives. A per-RB PHY model decides every
//! reception and attributes each loss to a single cause.
//!
//! ```no_run
//! use cv2x_mode4::{run_scenario, ScenarioConfig};
//!
//! let cfg = ScenarioConfig::default();
//! let result = run_scenario(&cfg).unwrap();
//! println!("{:?}", result.summary.grants);
//! ```

pub mod config;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod mobility;
pub mod phy;
pub mod resources;
pub mod rng;
pub mod runner;
pub mod sched;
pub mod traffic;

pub use config::{ScenarioConfig, TrafficClass};
pub use engine::{RunResult, RunSummary, Simulation};
pub use error::{ConfigError, SimError};
pub use runner::{run_scenario, run_to_dir, write_outputs};
pub use sched::SchedulerVariant;
pub use traffic::TrafficModel;
