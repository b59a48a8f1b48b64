use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::resources::TransportBlock;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterConfig {
    pub min: u32,
    pub max: u32,
}

impl Default for CounterConfig {
    fn default() -> Self {
        Self { min: 1, max: 40 }
    }
}

impl CounterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min == 0 || self.min > self.max {
            return Err(ConfigError::field("counter.min", "need 1 <= min <= max"));
        }
        Ok(())
    }
}

/// Backoff state of a vehicle with a packet waiting.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterState {
    pub remaining: u32,
    pub pending: TransportBlock,
}

impl CounterState {
    pub fn new(tb: TransportBlock, cfg: &CounterConfig, rng: &mut RngStream) -> Self {
        let remaining = rng.draw_uniform_int(i64::from(cfg.min), i64::from(cfg.max)) as u32;
        Self { remaining, pending: tb }
    }
}

/// One subframe of countdown. `free` lists the subchannels of the current
/// subframe that carry no projected reservation.
///
/// While the counter is positive it drops by `free.len()`. Once it sits at
/// zero, the first subframe with a free subchannel carries the packet on a
/// uniformly chosen free subchannel, which is returned.
pub fn counter_step(state: &mut CounterState, free: &[u32], rng: &mut RngStream) -> Option<u32> {
    if state.remaining > 0 {
        state.remaining = state.remaining.saturating_sub(free.len() as u32);
        return None;
    }
    if free.is_empty() {
        return None;
    }
    Some(free[rng.index(free.len())])
}
