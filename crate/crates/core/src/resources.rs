//! Sidelink time-frequency lattice: subframes x subchannels, candidate
//! single-subframe resources (CSRs), and the control/data containers that
//! travel on them.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Bandwidth of one resource block in Hz.
pub const RB_BANDWIDTH_HZ: f64 = 180_000.0;
/// Resource elements per RB in frequency (12 subcarriers of 15 kHz).
pub const RES_PER_RB: f64 = 12.0;
/// RBs occupied by the SCI on the PSCCH.
pub const SCI_RB_COUNT: u32 = 2;

pub type Subframe = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjacency {
    Adjacent,
    Nonadjacent,
}

/// One row of the (payload, MCS) -> RB table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TbSizeEntry {
    pub payload_bytes: u32,
    pub mcs: u32,
    /// Total RBs including the two SCI RBs.
    pub rb_count: u32,
    /// CSR width in subchannels.
    #[serde(default = "one")]
    pub width: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelLayout {
    pub bandwidth_mhz: u32,
    pub num_subchannels: u32,
    pub rbs_per_subchannel: u32,
    pub adjacency: Adjacency,
    pub sci_rb_count: u32,
    pub tb_sizes: Vec<TbSizeEntry>,
}

impl Default for ChannelLayout {
    /// Three 16-RB subchannels on 10 MHz, MCS 6 for 190-byte packets.
    fn default() -> Self {
        Self {
            bandwidth_mhz: 10,
            num_subchannels: 3,
            rbs_per_subchannel: 16,
            adjacency: Adjacency::Adjacent,
            sci_rb_count: SCI_RB_COUNT,
            tb_sizes: default_tb_sizes(),
        }
    }
}

/// The two operating points used for 190-byte CAMs.
pub fn default_tb_sizes() -> Vec<TbSizeEntry> {
    vec![
        TbSizeEntry { payload_bytes: 190, mcs: 7, rb_count: 14, width: 1 },
        TbSizeEntry { payload_bytes: 190, mcs: 6, rb_count: 16, width: 1 },
    ]
}

impl ChannelLayout {
    /// Two 12-RB subchannels, MCS 7.
    pub fn two_by_twelve() -> Self {
        Self { num_subchannels: 2, rbs_per_subchannel: 12, ..Self::default() }
    }

    pub fn total_rbs(&self) -> u32 {
        match self.bandwidth_mhz {
            10 => 50,
            20 => 100,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.total_rbs() == 0 {
            return Err(ConfigError::field("layout.bandwidth_mhz", "must be 10 or 20"));
        }
        if self.num_subchannels == 0 {
            return Err(ConfigError::field("layout.num_subchannels", "must be positive"));
        }
        if self.rbs_per_subchannel == 0 {
            return Err(ConfigError::field("layout.rbs_per_subchannel", "must be positive"));
        }
        if self.num_subchannels * self.rbs_per_subchannel > self.total_rbs() {
            return Err(ConfigError::field(
                "layout.num_subchannels",
                format!(
                    "{} x {} RBs exceeds the {} RBs of {} MHz",
                    self.num_subchannels,
                    self.rbs_per_subchannel,
                    self.total_rbs(),
                    self.bandwidth_mhz
                ),
            ));
        }
        if self.adjacency != Adjacency::Adjacent {
            return Err(ConfigError::field(
                "layout.adjacency",
                "only adjacent PSCCH+PSSCH is supported",
            ));
        }
        if self.sci_rb_count != SCI_RB_COUNT {
            return Err(ConfigError::field("layout.sci_rb_count", "must be 2"));
        }
        for e in &self.tb_sizes {
            if e.payload_bytes == 0 {
                return Err(ConfigError::field("layout.tb_sizes.payload_bytes", "must be positive"));
            }
            if e.rb_count <= self.sci_rb_count {
                return Err(ConfigError::field(
                    "layout.tb_sizes.rb_count",
                    format!("{} RBs leaves no room for data after the SCI", e.rb_count),
                ));
            }
            if e.width == 0 || e.width > self.num_subchannels {
                return Err(ConfigError::field(
                    "layout.tb_sizes.width",
                    format!("width {} outside 1..={}", e.width, self.num_subchannels),
                ));
            }
            let last_start = (self.num_subchannels - e.width) * self.rbs_per_subchannel;
            if last_start + e.rb_count > self.total_rbs() {
                return Err(ConfigError::field(
                    "layout.tb_sizes.rb_count",
                    format!("{} RBs from the last subchannel overruns the carrier", e.rb_count),
                ));
            }
        }
        Ok(())
    }

    /// First RB index of a subchannel.
    pub fn subchannel_rb_start(&self, subchannel: u32) -> u32 {
        subchannel * self.rbs_per_subchannel
    }

    /// Looks up the table entry for a packet. Missing entries are a
    /// configuration error and are reported at load time.
    pub fn tb_entry(&self, payload_bytes: u32, mcs: u32) -> Result<&TbSizeEntry, ConfigError> {
        if payload_bytes == 0 {
            return Err(ConfigError::field("payload_bytes", "must be positive"));
        }
        self.tb_sizes
            .iter()
            .find(|e| e.payload_bytes == payload_bytes && e.mcs == mcs)
            .ok_or_else(|| {
                ConfigError::field(
                    "layout.tb_sizes",
                    format!("no entry for {payload_bytes} bytes at MCS {mcs}"),
                )
            })
    }
}

/// RBs occupied by a packet, SCI included.
pub fn rb_count_for(payload_bytes: u32, mcs: u32, layout: &ChannelLayout) -> Result<u32, ConfigError> {
    layout.tb_entry(payload_bytes, mcs).map(|e| e.rb_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceId {
    pub subframe: Subframe,
    pub subchannel: u32,
}

/// Candidate single-subframe resource: `width` contiguous subchannels
/// starting at `first`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Csr {
    pub first: ResourceId,
    pub width: u32,
}

impl Csr {
    pub fn new(subframe: Subframe, subchannel: u32, width: u32) -> Self {
        Self { first: ResourceId { subframe, subchannel }, width }
    }

    pub fn subframe(&self) -> Subframe {
        self.first.subframe
    }

    pub fn subchannels(&self) -> std::ops::Range<u32> {
        self.first.subchannel..self.first.subchannel + self.width
    }

    pub fn overlaps_subchannels(&self, start: u32, width: u32) -> bool {
        self.first.subchannel < start + width && start < self.first.subchannel + self.width
    }

    /// Same frequency position, moved to another subframe.
    pub fn at(&self, subframe: Subframe) -> Self {
        Self { first: ResourceId { subframe, ..self.first }, width: self.width }
    }

    pub fn cells(&self) -> impl Iterator<Item = ResourceId> + '_ {
        self.subchannels().map(move |subchannel| ResourceId { subframe: self.first.subframe, subchannel })
    }
}

/// Sidelink control information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sci {
    pub sender: VehicleId,
    /// Reservation interval in ms; 0 announces no future use.
    pub rri_ms: u32,
    pub resource: Csr,
    pub mcs: u32,
    /// Set on short-term reservation signals; `resource` is then the
    /// future data slot being claimed.
    pub reservation_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportBlock {
    pub sender: VehicleId,
    pub payload_bytes: u32,
    /// Data RBs plus the SCI RBs.
    pub rb_count: u32,
    pub origin_time: Subframe,
}

/// Every CSR of the given width in `[window_start, window_end]`, ordered by
/// subframe then first subchannel.
pub fn enumerate_csrs(
    layout: &ChannelLayout,
    window_start: Subframe,
    window_end: Subframe,
    width: u32,
) -> Vec<Csr> {
    if width == 0 || width > layout.num_subchannels {
        log::warn!(
            "enumerate_csrs: width {width} does not fit {} subchannels",
            layout.num_subchannels
        );
        return Vec::new();
    }
    if window_start > window_end {
        return Vec::new();
    }
    let offsets = layout.num_subchannels - width + 1;
    let mut out = Vec::with_capacity(((window_end - window_start + 1) * u64::from(offsets)) as usize);
    for sf in window_start..=window_end {
        for sc in 0..offsets {
            out.push(Csr::new(sf, sc, width));
        }
    }
    out
}
