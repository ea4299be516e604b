//! Sub-state enumeration and the lumped degrees-of-freedom service chain.
//!
//! Every good/bad assignment of the N*M spatial paths is one sub-state of
//! the product Gilbert-Elliott chain. Sub-states are classified by their
//! available degrees of freedom -- the maximum bipartite matching between
//! transmit and receive antennas over good paths -- and the product chain
//! is lumped into K = min(N, M) + 1 classes. Lumping uses stationary
//! conditional weighting, so the lumped stationary vector provably equals
//! the aggregated sub-state distribution even though the DOF partition is
//! not exactly lumpable.

use crate::channel::{substate_capacity_profile, MimoConfig};
use crate::ge::GeParams;
use crate::units::LinkParams;
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::HashMap;

/// Hard cap on N*M: sub-state enumeration is 2^(N*M).
pub const MAX_PATH_BITS: usize = 20;

/// One good/bad assignment of all N*M spatial paths.
///
/// Bit `m * n_tx + n` is set when the path from transmit antenna `n` to
/// receive antenna `m` is good. For 2x2 the bit order matches the
/// conventional path listing {h11, h12, h21, h22}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubState {
    n_rx: usize,
    n_tx: usize,
    mask: u32,
}

impl SubState {
    pub fn new(n_rx: usize, n_tx: usize, mask: u32) -> Result<Self> {
        let bits = check_dims(n_rx, n_tx)?;
        if bits < 32 && mask >= (1u32 << bits) {
            return Err(Error::InvalidConfig(format!(
                "mask {mask:#x} does not fit {bits} paths"
            )));
        }
        Ok(SubState { n_rx, n_tx, mask })
    }

    /// Parse a path listing such as "gbbg" (row-major by receive antenna).
    pub fn from_good_string(s: &str, n_rx: usize, n_tx: usize) -> Result<Self> {
        let bits = check_dims(n_rx, n_tx)?;
        if s.len() != bits {
            return Err(Error::InvalidConfig(format!(
                "state string {s:?} must have {bits} characters"
            )));
        }
        let mut mask = 0u32;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                'g' => mask |= 1 << i,
                'b' => {}
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "state string may only contain 'g'/'b', found {other:?}"
                    )))
                }
            }
        }
        Ok(SubState { n_rx, n_tx, mask })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn is_good(&self, rx: usize, tx: usize) -> bool {
        debug_assert!(rx < self.n_rx && tx < self.n_tx);
        self.mask >> (rx * self.n_tx + tx) & 1 == 1
    }

    pub fn good_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Available degrees of freedom: the maximum bipartite matching size
    /// between transmit and receive antennas using only good paths.
    pub fn dof(&self) -> usize {
        dof_of_mask(self.mask, self.n_rx, self.n_tx)
    }

    /// Stationary probability of this sub-state given the per-path block
    /// error probability: paths are independent, good with prob 1 - omega.
    pub fn stationary_prob(&self, omega: f64) -> f64 {
        let good = self.good_count();
        let bad = (self.n_rx * self.n_tx) as u32 - good;
        (1.0 - omega).powi(good as i32) * omega.powi(bad as i32)
    }

    /// Lexicographically smallest mask over all relabelings of transmit and
    /// receive antennas. Sub-states with the same canonical mask have
    /// identically distributed channel matrices.
    pub fn canonical_mask(&self) -> u32 {
        canonical_mask(self.mask, self.n_rx, self.n_tx)
    }

    pub fn canonical(&self) -> SubState {
        SubState {
            n_rx: self.n_rx,
            n_tx: self.n_tx,
            mask: self.canonical_mask(),
        }
    }
}

impl std::fmt::Display for SubState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let bits = self.n_rx * self.n_tx;
        for i in 0..bits {
            write!(f, "{}", if self.mask >> i & 1 == 1 { 'g' } else { 'b' })?;
        }
        Ok(())
    }
}

fn check_dims(n_rx: usize, n_tx: usize) -> Result<usize> {
    if n_rx == 0 || n_tx == 0 {
        return Err(Error::InvalidConfig(
            "antenna counts must be at least 1".into(),
        ));
    }
    let bits = n_rx * n_tx;
    if bits > MAX_PATH_BITS {
        return Err(Error::EnumerationCap {
            bits,
            cap: MAX_PATH_BITS,
        });
    }
    Ok(bits)
}

/// Maximum bipartite matching size via augmenting paths (Kuhn).
pub fn dof_of_mask(mask: u32, n_rx: usize, n_tx: usize) -> usize {
    let mut match_rx: [i8; MAX_PATH_BITS] = [-1; MAX_PATH_BITS];
    let mut size = 0;
    for tx in 0..n_tx {
        let mut visited = [false; MAX_PATH_BITS];
        if augment(tx, mask, n_rx, n_tx, &mut visited, &mut match_rx) {
            size += 1;
        }
    }
    size
}

fn augment(
    tx: usize,
    mask: u32,
    n_rx: usize,
    n_tx: usize,
    visited: &mut [bool; MAX_PATH_BITS],
    match_rx: &mut [i8; MAX_PATH_BITS],
) -> bool {
    for rx in 0..n_rx {
        if mask >> (rx * n_tx + tx) & 1 == 1 && !visited[rx] {
            visited[rx] = true;
            let owner = match_rx[rx];
            if owner < 0 || augment(owner as usize, mask, n_rx, n_tx, visited, match_rx) {
                match_rx[rx] = tx as i8;
                return true;
            }
        }
    }
    false
}

/// DOF of every mask, indexed by mask value.
pub fn dof_table(n_rx: usize, n_tx: usize) -> Result<Vec<u8>> {
    let bits = check_dims(n_rx, n_tx)?;
    let n_masks = 1usize << bits;
    Ok((0..n_masks)
        .map(|m| dof_of_mask(m as u32, n_rx, n_tx) as u8)
        .collect())
}

/// Stationary probability of every sub-state, indexed by mask value.
pub fn substate_stationary(params: &GeParams, n_rx: usize, n_tx: usize) -> Result<Vec<f64>> {
    let bits = check_dims(n_rx, n_tx)?;
    let omega = params.block_error_prob();
    let good_pow = power_table(1.0 - omega, bits);
    let bad_pow = power_table(omega, bits);
    let n_masks = 1usize << bits;
    Ok((0..n_masks)
        .map(|m| {
            let good = (m as u32).count_ones() as usize;
            good_pow[good] * bad_pow[bits - good]
        })
        .collect())
}

fn power_table(x: f64, up_to: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(up_to + 1);
    t.push(1.0);
    for k in 1..=up_to {
        t.push(t[k - 1] * x);
    }
    t
}

/// One representative per orbit of the relabeling group (transmit
/// permutations x receive permutations), with the orbit size.
#[derive(Debug, Clone, Copy)]
pub struct OrbitRep {
    pub mask: u32,
    pub orbit_size: u32,
    pub dof: usize,
}

/// Enumerate canonical orbit representatives of all sub-states.
pub fn orbit_representatives(n_rx: usize, n_tx: usize) -> Result<Vec<OrbitRep>> {
    let bits = check_dims(n_rx, n_tx)?;
    let perms = mask_permutations(n_rx, n_tx);
    let group = perms.len() as u32;
    let n_masks = 1u64 << bits;
    let mut reps = Vec::new();
    'mask: for m in 0..n_masks {
        let m = m as u32;
        let mut stabilizer = 0u32;
        for perm in &perms {
            let image = apply_mask_permutation(m, perm);
            if image < m {
                continue 'mask; // not canonical
            }
            if image == m {
                stabilizer += 1;
            }
        }
        reps.push(OrbitRep {
            mask: m,
            orbit_size: group / stabilizer,
            dof: dof_of_mask(m, n_rx, n_tx),
        });
    }
    Ok(reps)
}

fn canonical_mask(mask: u32, n_rx: usize, n_tx: usize) -> u32 {
    let perms = mask_permutations(n_rx, n_tx);
    perms
        .iter()
        .map(|p| apply_mask_permutation(mask, p))
        .min()
        .unwrap_or(mask)
}

/// Bit-index permutations induced by every (rx permutation, tx permutation)
/// pair: entry `i` is the source bit for destination bit `i`.
fn mask_permutations(n_rx: usize, n_tx: usize) -> Vec<Vec<u8>> {
    let rx_perms = permutations(n_rx);
    let tx_perms = permutations(n_tx);
    let mut out = Vec::with_capacity(rx_perms.len() * tx_perms.len());
    for rp in &rx_perms {
        for tp in &tx_perms {
            let mut map = vec![0u8; n_rx * n_tx];
            for (rx, &src_rx) in rp.iter().enumerate() {
                for (tx, &src_tx) in tp.iter().enumerate() {
                    map[rx * n_tx + tx] = (src_rx as usize * n_tx + src_tx as usize) as u8;
                }
            }
            out.push(map);
        }
    }
    out
}

fn apply_mask_permutation(mask: u32, map: &[u8]) -> u32 {
    let mut out = 0u32;
    for (dst, &src) in map.iter().enumerate() {
        out |= (mask >> src & 1) << dst;
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<u8>> {
    let mut items: Vec<u8> = (0..k as u8).collect();
    let mut out = Vec::new();
    heap_permute(&mut items, k, &mut out);
    out
}

fn heap_permute(items: &mut Vec<u8>, k: usize, out: &mut Vec<Vec<u8>>) {
    if k <= 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Compensated (Kahan) summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// The lumped K-state service chain: stationary vector, transition matrix
/// and per-state service rates in data blocks per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DofChain {
    k: usize,
    pi: Vec<f64>,
    q: Vec<f64>, // row-major K x K
    rates: Vec<f64>,
    degenerate_classes: Vec<usize>,
}

impl DofChain {
    pub fn k_states(&self) -> usize {
        self.k
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.k + j]
    }

    pub fn q_row(&self, i: usize) -> &[f64] {
        &self.q[i * self.k..(i + 1) * self.k]
    }

    /// Service rates in blocks per slot; `rates()[0] == 0`.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Classes with zero stationary mass whose Q row was set to identity.
    pub fn degenerate_classes(&self) -> &[usize] {
        &self.degenerate_classes
    }

    /// Stationary mean service rate sum_i pi_i r_i (blocks per slot).
    pub fn first_order_capacity(&self) -> f64 {
        self.pi
            .iter()
            .zip(&self.rates)
            .map(|(p, r)| p * r)
            .sum()
    }

    /// Plain-text table: one header line, then K whitespace-separated rows
    /// of state index, pi, rate and the Q row.
    pub fn to_table_string(&self) -> String {
        let mut s = String::from("state pi rate");
        for j in 0..self.k {
            s.push_str(&format!(" q{j}"));
        }
        s.push('\n');
        for i in 0..self.k {
            s.push_str(&format!("{} {} {}", i, self.pi[i], self.rates[i]));
            for j in 0..self.k {
                s.push_str(&format!(" {}", self.q(i, j)));
            }
            s.push('\n');
        }
        s
    }

    /// Parse the format produced by [`Self::to_table_string`].
    pub fn from_table_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::ConfigParse {
            line: 1,
            msg: "empty chain table".into(),
        })?;
        let k = header.split_whitespace().count().saturating_sub(3);
        if k == 0 {
            return Err(Error::ConfigParse {
                line: 1,
                msg: "header must list at least one q column".into(),
            });
        }
        let mut pi = Vec::with_capacity(k);
        let mut rates = Vec::with_capacity(k);
        let mut q = Vec::with_capacity(k * k);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 + k {
                return Err(Error::ConfigParse {
                    line: idx + 1,
                    msg: format!("expected {} fields, found {}", 3 + k, fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::ConfigParse {
                    line: idx + 1,
                    msg: format!("bad number {s:?}"),
                })
            };
            pi.push(parse(fields[1])?);
            rates.push(parse(fields[2])?);
            for f in &fields[3..] {
                q.push(parse(f)?);
            }
        }
        if pi.len() != k {
            return Err(Error::ConfigParse {
                line: 0,
                msg: format!("expected {k} state rows, found {}", pi.len()),
            });
        }
        let degenerate_classes = (0..k).filter(|&i| pi[i] == 0.0).collect();
        Ok(DofChain {
            k,
            pi,
            q,
            rates,
            degenerate_classes,
        })
    }
}

/// Build the lumped chain for an N x M system with the given per-class
/// service rates (blocks per slot, `class_rates[0]` must be 0).
///
/// pi aggregates the product-chain stationary distribution per class; the
/// lumped transition matrix conditions on the stationary distribution
/// within each class:
///   Q[i][j] = sum_{s in i} (pi_s / pi_i) P(next class = j | s).
pub fn build_chain(
    params: &GeParams,
    n_rx: usize,
    n_tx: usize,
    class_rates: &[f64],
) -> Result<DofChain> {
    let bits = check_dims(n_rx, n_tx)?;
    let k = n_rx.min(n_tx) + 1;
    if class_rates.len() != k || class_rates[0] != 0.0 {
        return Err(Error::BadClassRates { expected: k });
    }
    if class_rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::BadClassRates { expected: k });
    }
    if class_rates.windows(2).any(|w| w[1] < w[0]) {
        eprintln!(
            "warning: class rates are not nondecreasing in DOF: {:?}",
            class_rates
        );
    }

    let dofs = dof_table(n_rx, n_tx)?;
    let pi_sub = substate_stationary(params, n_rx, n_tx)?;
    let n_masks = 1usize << bits;

    let mut pi_acc = vec![KahanSum::default(); k];
    for m in 0..n_masks {
        pi_acc[dofs[m] as usize].add(pi_sub[m]);
    }
    let pi: Vec<f64> = pi_acc.iter().map(|a| a.value()).collect();

    // Joint transition weight of one path: product over paths of the
    // per-path transition probability, which depends only on the four
    // overlap counts between the current and next mask.
    let stay_good = power_table(1.0 - params.p_gb(), bits);
    let go_bad = power_table(params.p_gb(), bits);
    let go_good = power_table(params.p_bg(), bits);
    let stay_bad = power_table(1.0 - params.p_bg(), bits);

    let chunk = 2048usize;
    let n_chunks = n_masks.div_ceil(chunk);
    let full = (n_masks - 1) as u32;
    let partials: Vec<Vec<KahanSum>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![KahanSum::default(); k * k];
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(n_masks);
            for m in lo..hi {
                let i = dofs[m] as usize;
                let w = pi_sub[m];
                if w == 0.0 {
                    continue;
                }
                let m = m as u32;
                let mut row = vec![KahanSum::default(); k];
                for next in 0..n_masks {
                    let next_u = next as u32;
                    let gg = (m & next_u).count_ones() as usize;
                    let gb = (m & !next_u).count_ones() as usize;
                    let bg = (!m & full & next_u).count_ones() as usize;
                    let bb = bits - gg - gb - bg;
                    let p = stay_good[gg] * go_bad[gb] * go_good[bg] * stay_bad[bb];
                    row[dofs[next] as usize].add(p);
                }
                for j in 0..k {
                    acc[i * k + j].add(w * row[j].value());
                }
            }
            acc
        })
        .collect();

    let mut numer = vec![KahanSum::default(); k * k];
    for part in &partials {
        for (dst, src) in numer.iter_mut().zip(part.iter()) {
            dst.add(src.value());
        }
    }

    let mut q = vec![0.0; k * k];
    let mut degenerate_classes = Vec::new();
    for i in 0..k {
        if pi[i] == 0.0 {
            degenerate_classes.push(i);
            q[i * k + i] = 1.0;
            continue;
        }
        for j in 0..k {
            q[i * k + j] = numer[i * k + j].value() / pi[i];
        }
    }
    if !degenerate_classes.is_empty() {
        eprintln!(
            "warning: DOF classes {:?} have zero stationary mass; their Q rows were set to identity",
            degenerate_classes
        );
    }

    Ok(DofChain {
        k,
        pi,
        q,
        rates: class_rates.to_vec(),
        degenerate_classes,
    })
}

/// Monte-Carlo estimate of one class rate.
#[derive(Debug, Clone, Copy)]
pub struct ClassRateEstimate {
    /// Minimum mean sub-state capacity of the class, bits/s/Hz.
    pub bits_per_s_hz: f64,
    /// Same rate converted to data blocks per slot.
    pub blocks_per_slot: f64,
    /// Monte-Carlo standard error of the winning sub-state mean, bits/s/Hz.
    pub std_err_bits: f64,
    /// Canonical mask of the sub-state attaining the minimum.
    pub min_mask: u32,
    /// Number of orbit representatives examined in the class.
    pub n_orbit_reps: usize,
}

/// Per-class service rates: the minimum mean capacity over the sub-states
/// of each DOF class.
#[derive(Debug, Clone)]
pub struct ClassRates {
    pub per_class: Vec<ClassRateEstimate>,
}

impl ClassRates {
    pub fn blocks_per_slot(&self) -> Vec<f64> {
        self.per_class.iter().map(|c| c.blocks_per_slot).collect()
    }

    pub fn bits_per_s_hz(&self) -> Vec<f64> {
        self.per_class.iter().map(|c| c.bits_per_s_hz).collect()
    }
}

/// Estimate all class rates by Monte-Carlo over one representative per
/// symmetry orbit (orbit members share one capacity distribution).
pub fn class_rates(config: &MimoConfig, link: &LinkParams) -> Result<ClassRates> {
    let reps = orbit_representatives(config.n_rx, config.n_tx)?;
    let k = config.n_rx.min(config.n_tx) + 1;
    let rho = config.snr_linear();
    let mut per_class: Vec<Option<ClassRateEstimate>> = vec![None; k];
    let mut rep_counts = vec![0usize; k];
    for rep in &reps {
        rep_counts[rep.dof] += 1;
    }
    for rep in &reps {
        let est = if rep.dof == 0 && rep.mask == 0 {
            (0.0, 0.0)
        } else {
            let sub = SubState::new(config.n_rx, config.n_tx, rep.mask)?;
            let profile = substate_capacity_profile(&sub, config, &[rho])?;
            (profile[0].mean, profile[0].std_err)
        };
        let cur = &mut per_class[rep.dof];
        let better = match cur {
            None => true,
            Some(c) => est.0 < c.bits_per_s_hz,
        };
        if better {
            *cur = Some(ClassRateEstimate {
                bits_per_s_hz: est.0,
                blocks_per_slot: link.blocks_per_slot(est.0),
                std_err_bits: est.1,
                min_mask: rep.mask,
                n_orbit_reps: rep_counts[rep.dof],
            });
        }
    }
    let per_class = per_class
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| Error::InvalidConfig(format!("DOF class {i} has no sub-states")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassRates { per_class })
}

/// Rate of a single class; see [`class_rates`].
pub fn class_rate(
    class_index: usize,
    config: &MimoConfig,
    link: &LinkParams,
) -> Result<ClassRateEstimate> {
    let all = class_rates(config, link)?;
    all.per_class
        .get(class_index)
        .copied()
        .ok_or_else(|| Error::InvalidConfig(format!("class index {class_index} out of range")))
}

/// Class rates by full sub-state enumeration, memoizing estimates per
/// canonical mask. Yields values identical to [`class_rates`]; used to
/// check the orbit reduction.
pub fn class_rates_full_enum(config: &MimoConfig, link: &LinkParams) -> Result<ClassRates> {
    let bits = check_dims(config.n_rx, config.n_tx)?;
    let dofs = dof_table(config.n_rx, config.n_tx)?;
    let k = config.n_rx.min(config.n_tx) + 1;
    let rho = config.snr_linear();
    let mut memo: HashMap<u32, (f64, f64)> = HashMap::new();
    let mut per_class: Vec<Option<ClassRateEstimate>> = vec![None; k];
    let mut rep_seen: Vec<std::collections::HashSet<u32>> = vec![Default::default(); k];
    for mask in 0..(1usize << bits) {
        let dof = dofs[mask] as usize;
        let canon = canonical_mask(mask as u32, config.n_rx, config.n_tx);
        rep_seen[dof].insert(canon);
        let est = if let Some(&e) = memo.get(&canon) {
            e
        } else {
            let e = if mask == 0 {
                (0.0, 0.0)
            } else {
                let sub = SubState::new(config.n_rx, config.n_tx, canon)?;
                let profile = substate_capacity_profile(&sub, config, &[rho])?;
                (profile[0].mean, profile[0].std_err)
            };
            memo.insert(canon, e);
            e
        };
        let cur = &mut per_class[dof];
        let better = match cur {
            None => true,
            Some(c) => est.0 < c.bits_per_s_hz,
        };
        if better {
            *cur = Some(ClassRateEstimate {
                bits_per_s_hz: est.0,
                blocks_per_slot: link.blocks_per_slot(est.0),
                std_err_bits: est.1,
                min_mask: canon,
                n_orbit_reps: 0,
            });
        }
    }
    let per_class = per_class
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut c =
                c.ok_or_else(|| Error::InvalidConfig(format!("DOF class {i} has no sub-states")))?;
            c.n_orbit_reps = rep_seen[i].len();
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassRates { per_class })
}
