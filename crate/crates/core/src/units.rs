//! Unit conversions between spectral efficiency and the discrete block/slot
//! time model, parameterized after 802.11n in 40 MHz channels.

/// Converts a spectral efficiency `c` (bits/s/Hz) into data blocks served
/// per slot: c * bandwidth * slot_length / block_bits.
pub fn rate_conversion(
    c_bits_per_s_per_hz: f64,
    bandwidth_hz: f64,
    slot_us: f64,
    block_bytes: f64,
) -> f64 {
    c_bits_per_s_per_hz * bandwidth_hz * (slot_us * 1e-6) / (block_bytes * 8.0)
}

/// Link constants tying the analysis to a physical channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub bandwidth_hz: f64,
    pub slot_us: f64,
    pub block_bytes: f64,
}

impl LinkParams {
    /// 802.11n with 40 MHz channels. The 31 us slot is roughly the time to
    /// send one 2312-byte block at the standard's 600 Mbps peak rate.
    pub fn ieee80211n_40mhz() -> Self {
        LinkParams {
            bandwidth_hz: 40e6,
            slot_us: 31.0,
            block_bytes: 2312.0,
        }
    }

    pub fn block_bits(&self) -> f64 {
        self.block_bytes * 8.0
    }

    /// Spectral efficiency (bits/s/Hz) -> blocks per slot.
    pub fn blocks_per_slot(&self, c_bits_per_s_per_hz: f64) -> f64 {
        rate_conversion(
            c_bits_per_s_per_hz,
            self.bandwidth_hz,
            self.slot_us,
            self.block_bytes,
        )
    }

    /// Inverse of [`Self::blocks_per_slot`].
    pub fn bits_per_s_per_hz(&self, blocks_per_slot: f64) -> f64 {
        blocks_per_slot * self.block_bits() / (self.bandwidth_hz * self.slot_us * 1e-6)
    }

    /// Arrival rate in Mbps -> blocks per slot.
    pub fn mbps_to_blocks_per_slot(&self, mbps: f64) -> f64 {
        mbps * 1e6 * (self.slot_us * 1e-6) / self.block_bits()
    }

    /// Burst size sigma (blocks) of a periodic source with the given rate.
    pub fn burst_blocks(&self, mbps: f64, period_slots: u32) -> f64 {
        self.mbps_to_blocks_per_slot(mbps) * period_slots as f64
    }

    pub fn slots_to_ms(&self, slots: f64) -> f64 {
        slots * self.slot_us / 1000.0
    }
}

impl Default for LinkParams {
    fn default() -> Self {
        Self::ieee80211n_40mhz()
    }
}
