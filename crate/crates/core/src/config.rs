//! Experiment configuration: flat `key = value` text files with `#`
//! comments. Every key is optional; defaults reproduce the 802.11n
//! parameterization (40 MHz channel, 31 us slots, 2312-byte blocks,
//! period 10 slots, 240 Mbps arrivals, eps = 1e-6, p_gb = 0.01,
//! p_bg = 0.1, 500 scatterers).

use crate::channel::MimoConfig;
use crate::ge::GeParams;
use crate::mgf::PeriodicSource;
use crate::units::LinkParams;
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub bandwidth_hz: f64,
    pub slot_us: f64,
    pub block_bytes: f64,
    /// Antenna counts N for N x N systems (sweep variable).
    pub n_antennas: Vec<usize>,
    /// Receiver SNR in dB (sweep variable).
    pub snr_db: Vec<f64>,
    pub p_gb: f64,
    /// Bad-to-good probabilities (sweep variable; swept at fixed omega).
    pub p_bg: Vec<f64>,
    /// Violation probabilities (sweep variable).
    pub epsilon: Vec<f64>,
    /// Arrival rates in Mbps (sweep variable).
    pub arrival_rate_mbps: Vec<f64>,
    pub period_slots: u32,
    /// Hop counts (sweep variable for the multihop command).
    pub hops: Vec<usize>,
    pub n_mc_samples: usize,
    pub rng_seed: u64,
    pub output: Option<PathBuf>,
    /// Simulator length and warmup for the validate command.
    pub sim_slots: u64,
    pub warmup_slots: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            bandwidth_hz: 40e6,
            slot_us: 31.0,
            block_bytes: 2312.0,
            n_antennas: vec![2],
            snr_db: vec![15.8],
            p_gb: 0.01,
            p_bg: vec![0.1],
            epsilon: vec![1e-6],
            arrival_rate_mbps: vec![240.0],
            period_slots: 10,
            hops: vec![1],
            n_mc_samples: 100_000,
            rng_seed: 1,
            output: None,
            sim_slots: 10_000_000,
            warmup_slots: 10_000,
        }
    }
}

impl ExperimentConfig {
    /// Parse a config file body on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: idx + 1,
                msg: format!("expected `key = value`, found {raw:?}"),
            })?;
            cfg.set(key.trim(), value.trim(), idx + 1)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let bad = |msg: String| Error::ConfigParse { line, msg };
        fn scalar<T: std::str::FromStr>(v: &str, line: usize) -> Result<T> {
            v.parse().map_err(|_| Error::ConfigParse {
                line,
                msg: format!("bad value {v:?}"),
            })
        }
        fn list<T: std::str::FromStr>(v: &str, line: usize) -> Result<Vec<T>> {
            let items = v
                .split(',')
                .map(|s| scalar(s.trim(), line))
                .collect::<Result<Vec<T>>>()?;
            if items.is_empty() {
                return Err(Error::ConfigParse {
                    line,
                    msg: "empty list".into(),
                });
            }
            Ok(items)
        }
        match key {
            "bandwidth_hz" => self.bandwidth_hz = scalar(value, line)?,
            "slot_us" => self.slot_us = scalar(value, line)?,
            "block_bytes" => self.block_bytes = scalar(value, line)?,
            "n_antennas" => self.n_antennas = list(value, line)?,
            "snr_db" => self.snr_db = list(value, line)?,
            "p_gb" => self.p_gb = scalar(value, line)?,
            "p_bg" => self.p_bg = list(value, line)?,
            "epsilon" => self.epsilon = list(value, line)?,
            "arrival_rate_mbps" => self.arrival_rate_mbps = list(value, line)?,
            "period_slots" => self.period_slots = scalar(value, line)?,
            "hops" => self.hops = list(value, line)?,
            "n_mc_samples" => self.n_mc_samples = scalar(value, line)?,
            "rng_seed" => self.rng_seed = scalar(value, line)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "sim_slots" => self.sim_slots = scalar(value, line)?,
            "warmup_slots" => self.warmup_slots = scalar(value, line)?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn link(&self) -> LinkParams {
        LinkParams {
            bandwidth_hz: self.bandwidth_hz,
            slot_us: self.slot_us,
            block_bytes: self.block_bytes,
        }
    }

    /// GE parameters of the baseline configuration (first p_bg).
    pub fn ge(&self) -> Result<GeParams> {
        GeParams::new(self.p_gb, self.p_bg[0])
    }

    /// Periodic source for a given arrival rate.
    pub fn arrival(&self, rate_mbps: f64) -> Result<PeriodicSource> {
        PeriodicSource::new(
            self.link().burst_blocks(rate_mbps, self.period_slots),
            self.period_slots,
        )
    }

    /// Channel Monte-Carlo configuration for an N x N system.
    pub fn mimo(&self, n_antennas: usize, snr_db: f64) -> MimoConfig {
        MimoConfig {
            n_tx: n_antennas,
            n_rx: n_antennas,
            snr_db,
            n_scatterers: 500,
            n_mc_samples: self.n_mc_samples,
            rng_seed: self.rng_seed,
        }
    }

    /// Canonical one-line-per-key rendering (sorted keys), the hash input.
    pub fn canonical_string(&self) -> String {
        fn join<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        let mut lines = vec![
            format!("arrival_rate_mbps = {}", join(&self.arrival_rate_mbps)),
            format!("bandwidth_hz = {}", self.bandwidth_hz),
            format!("block_bytes = {}", self.block_bytes),
            format!("epsilon = {}", join(&self.epsilon)),
            format!("hops = {}", join(&self.hops)),
            format!("n_antennas = {}", join(&self.n_antennas)),
            format!("n_mc_samples = {}", self.n_mc_samples),
            format!("p_bg = {}", join(&self.p_bg)),
            format!("p_gb = {}", self.p_gb),
            format!("period_slots = {}", self.period_slots),
            format!("rng_seed = {}", self.rng_seed),
            format!("sim_slots = {}", self.sim_slots),
            format!("slot_us = {}", self.slot_us),
            format!("snr_db = {}", join(&self.snr_db)),
            format!("warmup_slots = {}", self.warmup_slots),
        ];
        if let Some(out) = &self.output {
            lines.push(format!("output = {}", out.display()));
        }
        lines.join("\n") + "\n"
    }

    /// SHA-256 of the canonical rendering.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas.is_empty()
            || self.snr_db.is_empty()
            || self.p_bg.is_empty()
            || self.epsilon.is_empty()
            || self.arrival_rate_mbps.is_empty()
            || self.hops.is_empty()
        {
            return Err(Error::InvalidConfig("empty sweep list".into()));
        }
        if self.bandwidth_hz <= 0.0 || self.slot_us <= 0.0 || self.block_bytes <= 0.0 {
            return Err(Error::InvalidConfig(
                "bandwidth, slot length and block size must be positive".into(),
            ));
        }
        for &n in &self.n_antennas {
            if n == 0 || n * n > crate::dof::MAX_PATH_BITS {
                return Err(Error::InvalidConfig(format!(
                    "n_antennas = {n} outside the supported range"
                )));
            }
        }
        for &e in &self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidConfig(format!("epsilon = {e} not in (0,1)")));
            }
        }
        self.ge()?;
        Ok(())
    }
}
