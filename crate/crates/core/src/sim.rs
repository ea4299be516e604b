//! Discrete-time FIFO queue simulator over simulated Gilbert-Elliott paths.
//!
//! This is the empirical oracle for the analytic bounds: per slot, every
//! spatial path of every hop advances its GE chain, the slot's DOF class
//! fixes the service rate, and the queue serves fluid FIFO (fractional
//! blocks, matching the fluid analytic model). Multi-hop forwarding is
//! cut-through: what hop k serves in a slot is available to hop k+1 in the
//! same slot, mirroring the convolution model which has no per-hop slot
//! penalty. Delays are volume-weighted and integer-valued (departure slot
//! minus arrival slot), so the result is kept as a histogram.

use crate::dof::{dof_table, KahanSum};
use crate::ge::{GeParams, PathState};
use crate::mgf::PeriodicSource;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// 99% two-sided normal quantile, for the binomial confidence intervals.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Slots with active arrivals; the queue is drained afterwards.
    pub n_slots: u64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub ge: GeParams,
    /// Per-DOF-class service rates in blocks per slot (length min(N,M)+1).
    pub rates: Vec<f64>,
    pub arrival: PeriodicSource,
    pub hops: usize,
    pub rng_seed: u64,
    /// Blocks arriving before this slot are excluded from the statistics.
    pub warmup_slots: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.hops == 0 {
            return Err(Error::InvalidConfig("hops must be >= 1".into()));
        }
        let k = self.n_rx.min(self.n_tx) + 1;
        if self.rates.len() != k {
            return Err(Error::BadClassRates { expected: k });
        }
        Ok(())
    }
}

/// Volume-weighted delay statistics of one simulation run.
#[derive(Debug, Clone)]
pub struct SimResult {
    /// hist[d] = volume (blocks) that experienced an end-to-end delay of
    /// exactly d slots, counting only blocks arriving after warmup.
    hist: Vec<f64>,
    total_volume: f64,
    pub arrived_blocks: f64,
    pub departed_blocks: f64,
    pub final_backlog: f64,
    /// False if the drain phase hit its safety cap before emptying.
    pub drained: bool,
    /// Fraction of measured slots spent in each DOF class (first hop).
    pub class_occupancy: Vec<f64>,
    /// Occupancy per batch (100 batches) for batch-means standard errors.
    pub occupancy_batches: Vec<Vec<f64>>,
}

impl SimResult {
    /// Empirical P[W > d]: volume delayed more than `d_slots` over the
    /// measured volume (0 when nothing was measured).
    pub fn violation_freq(&self, d_slots: usize) -> f64 {
        if self.total_volume <= 0.0 {
            return 0.0;
        }
        self.violation_volume(d_slots) / self.total_volume
    }

    fn violation_volume(&self, d_slots: usize) -> f64 {
        if d_slots + 1 >= self.hist.len() {
            return 0.0;
        }
        self.hist[d_slots + 1..].iter().sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn max_delay(&self) -> usize {
        self.hist.len().saturating_sub(1)
    }

    /// Wilson score interval for P[W > d] at confidence quantile `z`,
    /// treating the measured block volume as the trial count.
    pub fn violation_ci(&self, d_slots: usize, z: f64) -> (f64, f64) {
        let n = self.total_volume;
        if n <= 0.0 {
            return (0.0, 0.0);
        }
        let p = self.violation_freq(d_slots);
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = p + z2 / (2.0 * n);
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        (
            ((center - half) / denom).max(0.0),
            ((center + half) / denom).min(1.0),
        )
    }

    /// CSV of the delay CCDF: `d_slots,ccdf,ci_low,ci_high`, one row per
    /// delay value up to the maximum observed delay.
    pub fn ccdf_csv(&self) -> String {
        let mut out = String::from("d_slots,ccdf,ci_low,ci_high\n");
        for d in 0..=self.max_delay() {
            let (lo, hi) = self.violation_ci(d, Z_99);
            out.push_str(&format!("{d},{},{lo},{hi}\n", self.violation_freq(d)));
        }
        out
    }
}

struct Hop {
    paths: Vec<PathState>,
    queue: VecDeque<(u64, f64)>, // (arrival slot at hop 1, blocks)
    backlog: f64,
    rng: ChaCha8Rng,
}

/// Run the simulator: `n_slots` of arrivals, then drain.
pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let n_paths = cfg.n_rx * cfg.n_tx;
    let dofs = dof_table(cfg.n_rx, cfg.n_tx)?;
    let omega = cfg.ge.block_error_prob();

    let mut hops: Vec<Hop> = (0..cfg.hops)
        .map(|h| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(h as u64 + 1);
            // stationary initial path states
            let paths = (0..n_paths)
                .map(|_| {
                    if rng.gen::<f64>() < omega {
                        PathState::Bad
                    } else {
                        PathState::Good
                    }
                })
                .collect();
            Hop {
                paths,
                queue: VecDeque::new(),
                backlog: 0.0,
                rng,
            }
        })
        .collect();

    let mut arrival_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    arrival_rng.set_stream(0);
    let period = cfg.arrival.period() as u64;
    let sigma = cfg.arrival.sigma();
    let phase = (arrival_rng.gen::<f64>() * period as f64).floor() as u64;

    let mut hist: Vec<f64> = Vec::new();
    let mut total_volume = KahanSum::default();
    let mut arrived = KahanSum::default();
    let mut departed = KahanSum::default();

    let n_batches = 100usize;
    let k_classes = cfg.n_rx.min(cfg.n_tx) + 1;
    let mut batch_counts = vec![vec![0u64; k_classes]; n_batches];
    let batch_len = (cfg.n_slots / n_batches as u64).max(1);

    let drain_cap = cfg
        .n_slots
        .saturating_mul(10)
        .max(cfg.n_slots + 1_000_000);
    let mut slot: u64 = 0;
    let mut last_departed_arrival: u64 = 0;
    loop {
        let arrivals_active = slot < cfg.n_slots;
        if !arrivals_active && hops.iter().all(|h| h.backlog == 0.0) {
            break;
        }
        if slot >= drain_cap {
            break;
        }

        // 1. all channels advance at the slot boundary
        let mut slot_rates = Vec::with_capacity(cfg.hops);
        for (h, hop) in hops.iter_mut().enumerate() {
            let mut mask = 0u32;
            for (i, state) in hop.paths.iter_mut().enumerate() {
                *state = cfg.ge.step(*state, hop.rng.gen::<f64>());
                if *state == PathState::Good {
                    mask |= 1 << i;
                }
            }
            let class = dofs[mask as usize] as usize;
            if h == 0 && arrivals_active {
                let b = ((slot / batch_len) as usize).min(n_batches - 1);
                batch_counts[b][class] += 1;
            }
            slot_rates.push(cfg.rates[class]);
        }

        // 2. periodic arrivals enter the first hop
        if arrivals_active && slot >= phase && (slot - phase) % period == 0 {
            hops[0].queue.push_back((slot, sigma));
            hops[0].backlog += sigma;
            arrived.add(sigma);
        }

        // 3. FIFO fluid service, cut-through between hops
        for h in 0..cfg.hops {
            let mut capacity = slot_rates[h];
            let mut forwarded: Vec<(u64, f64)> = Vec::new();
            while capacity > 0.0 {
                let Some(front) = hops[h].queue.front_mut() else {
                    break;
                };
                let take = front.1.min(capacity);
                let arrival_slot = front.0;
                front.1 -= take;
                let emptied = front.1 <= 0.0;
                if emptied {
                    hops[h].queue.pop_front();
                }
                capacity -= take;
                hops[h].backlog -= take;
                if h + 1 < cfg.hops {
                    forwarded.push((arrival_slot, take));
                } else {
                    // FIFO sanity: departures leave in arrival order
                    debug_assert!(arrival_slot >= last_departed_arrival);
                    last_departed_arrival = arrival_slot;
                    departed.add(take);
                    if arrival_slot >= cfg.warmup_slots {
                        let d = (slot - arrival_slot) as usize;
                        if d >= hist.len() {
                            hist.resize(d + 1, 0.0);
                        }
                        hist[d] += take;
                        total_volume.add(take);
                    }
                }
                if capacity <= 0.0 {
                    break;
                }
            }
            if h + 1 < cfg.hops {
                for piece in forwarded {
                    hops[h + 1].backlog += piece.1;
                    hops[h + 1].queue.push_back(piece);
                }
            }
        }
        // clamp fp dust so the drain loop terminates
        for hop in hops.iter_mut() {
            if hop.queue.is_empty() {
                hop.backlog = 0.0;
            }
        }

        slot += 1;
    }

    let final_backlog: f64 = hops.iter().map(|h| h.backlog).sum();
    let drained = hops.iter().all(|h| h.queue.is_empty());

    let measured: u64 = batch_counts.iter().flatten().sum();
    let occupancy_batches: Vec<Vec<f64>> = batch_counts
        .iter()
        .filter(|b| b.iter().sum::<u64>() > 0)
        .map(|b| {
            let n: u64 = b.iter().sum();
            b.iter().map(|&c| c as f64 / n as f64).collect()
        })
        .collect();
    let class_occupancy: Vec<f64> = (0..k_classes)
        .map(|i| {
            if measured == 0 {
                0.0
            } else {
                batch_counts.iter().map(|b| b[i]).sum::<u64>() as f64 / measured as f64
            }
        })
        .collect();

    Ok(SimResult {
        hist,
        total_volume: total_volume.value(),
        arrived_blocks: arrived.value(),
        departed_blocks: departed.value(),
        final_backlog,
        drained,
        class_occupancy,
        occupancy_batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dof::build_chain;

    fn base_cfg() -> SimConfig {
        SimConfig {
            n_slots: 100_000,
            n_tx: 2,
            n_rx: 2,
            ge: GeParams::new(0.01, 0.1).unwrap(),
            rates: vec![0.0, 0.25, 0.5],
            arrival: PeriodicSource::new(0.4 * 10.0 * 0.8, 10).unwrap(),
            hops: 1,
            rng_seed: 42,
            warmup_slots: 1_000,
        }
    }

    #[test]
    fn zero_arrival_slots_give_empty_statistics() {
        let mut cfg = base_cfg();
        cfg.n_slots = 0;
        let r = run(&cfg).unwrap();
        assert_eq!(r.total_volume(), 0.0);
        assert_eq!(r.violation_freq(0), 0.0);
        assert_eq!(r.arrived_blocks, 0.0);
        assert!(r.drained);
    }

    /// All paths pinned good: a deterministic FIFO schedule. A burst of
    /// sigma = 3 served at 1 block/slot departs over three slots with
    /// delays {0, 1, 2}: max delay ceil(sigma/r) - 1, and P[W > 1] = 1/3.
    #[test]
    fn deterministic_all_good_schedule() {
        let mut cfg = base_cfg();
        cfg.ge = GeParams::new(0.0, 0.1).unwrap(); // omega = 0, pinned good
        cfg.rates = vec![0.0, 0.5, 1.0];
        cfg.arrival = PeriodicSource::new(3.0, 10).unwrap();
        cfg.n_slots = 10_000;
        cfg.warmup_slots = 100;
        let r = run(&cfg).unwrap();
        assert!(r.drained);
        assert_eq!(r.max_delay(), 2);
        assert!((r.violation_freq(1) - 1.0 / 3.0).abs() < 1e-9);
        assert!((r.violation_freq(0) - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.violation_freq(2), 0.0);
    }

    #[test]
    fn conservation_holds_exactly() {
        let cfg = base_cfg();
        let r = run(&cfg).unwrap();
        assert!(r.drained);
        let lost = (r.arrived_blocks - r.departed_blocks - r.final_backlog).abs();
        assert!(
            lost <= 1e-9 * r.arrived_blocks.max(1.0),
            "conservation violated by {lost}"
        );
        // drained run: everything departed
        assert!(r.final_backlog.abs() < 1e-9);
    }

    #[test]
    fn conservation_with_three_hops() {
        let mut cfg = base_cfg();
        cfg.hops = 3;
        cfg.n_slots = 30_000;
        let r = run(&cfg).unwrap();
        let lost = (r.arrived_blocks - r.departed_blocks - r.final_backlog).abs();
        assert!(lost <= 1e-9 * r.arrived_blocks.max(1.0));
    }

    #[test]
    fn violation_freq_nonincreasing_in_d() {
        let cfg = base_cfg();
        let r = run(&cfg).unwrap();
        let mut last = 1.0;
        for d in 0..=r.max_delay() {
            let v = r.violation_freq(d);
            assert!(v <= last + 1e-15);
            last = v;
        }
        assert_eq!(r.violation_freq(r.max_delay()), 0.0);
    }

    #[test]
    fn multihop_delays_dominate_single_hop() {
        let mut cfg = base_cfg();
        cfg.n_slots = 200_000;
        let single = run(&cfg).unwrap();
        cfg.hops = 3;
        let multi = run(&cfg).unwrap();
        // same seed for hop 1; more hops can only add queueing on top
        for d in [0usize, 1, 2, 5, 10] {
            assert!(multi.violation_freq(d) >= single.violation_freq(d) - 1e-3);
        }
    }

    #[test]
    fn occupancy_matches_chain_pi() {
        let mut cfg = base_cfg();
        cfg.n_slots = 1_000_000;
        let r = run(&cfg).unwrap();
        let chain = build_chain(&cfg.ge, 2, 2, &cfg.rates).unwrap();
        for i in 0..3 {
            let mean: f64 = r.occupancy_batches.iter().map(|b| b[i]).sum::<f64>()
                / r.occupancy_batches.len() as f64;
            let var: f64 = r
                .occupancy_batches
                .iter()
                .map(|b| (b[i] - mean).powi(2))
                .sum::<f64>()
                / (r.occupancy_batches.len() - 1) as f64;
            let se = (var / r.occupancy_batches.len() as f64).sqrt();
            assert!(
                (r.class_occupancy[i] - chain.pi()[i]).abs() <= 3.0 * se.max(1e-9),
                "class {i}: {} vs pi {}",
                r.class_occupancy[i],
                chain.pi()[i]
            );
        }
    }

    #[test]
    fn wilson_interval_sane() {
        let cfg = base_cfg();
        let r = run(&cfg).unwrap();
        let (lo, hi) = r.violation_ci(0, Z_99);
        let p = r.violation_freq(0);
        assert!(lo <= p && p <= hi);
        assert!(lo >= 0.0 && hi <= 1.0);
        // zero observed violations still give a positive upper edge
        let (_, hi_tail) = r.violation_ci(r.max_delay(), Z_99);
        assert!(hi_tail > 0.0);
    }

    #[test]
    fn ccdf_csv_has_header_and_rows() {
        let mut cfg = base_cfg();
        cfg.n_slots = 20_000;
        let r = run(&cfg).unwrap();
        let csv = r.ccdf_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "d_slots,ccdf,ci_low,ci_high");
        assert_eq!(csv.lines().count(), r.max_delay() + 2);
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let cfg = base_cfg();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.total_volume().to_bits(), b.total_volume().to_bits());
        assert_eq!(a.ccdf_csv(), b.ccdf_csv());
    }

    #[test]
    fn bad_rates_length_rejected() {
        let mut cfg = base_cfg();
        cfg.rates = vec![0.0, 1.0];
        assert!(matches!(run(&cfg), Err(Error::BadClassRates { expected: 3 })));
    }
}
