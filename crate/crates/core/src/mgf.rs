//! Moment generating functions of arrivals and service.
//!
//! Arrivals: a periodic source emits sigma data blocks every `period`
//! slots with a uniformly random start phase; its MGF has the closed form
//!
//!   M_A(theta, t) = e^{theta sigma floor(t/tau)}
//!                   (1 + (t/tau - floor(t/tau)) (e^{theta sigma} - 1)).
//!
//! Service: a Markov-modulated server with per-state rates r_i has
//!
//!   Mbar_S(theta, t) = pi (R(-theta) Q)^{t-1} R(-theta) 1,   t >= 1,
//!
//! evaluated by iterated rescaled vector-matrix products so arbitrarily
//! long horizons neither underflow nor overflow. Independent tandem hops
//! compose by discrete convolution of the per-hop MGF sequences.
//! All evaluations are carried in the log domain internally.

use crate::dof::DofChain;
use crate::{Error, Result};

/// Periodic arrival source: `sigma` blocks every `period` slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicSource {
    sigma: f64,
    period: u32,
}

impl PeriodicSource {
    pub fn new(sigma: f64, period: u32) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "burst size sigma = {sigma} must be positive"
            )));
        }
        if period == 0 {
            return Err(Error::InvalidConfig("period must be at least 1 slot".into()));
        }
        Ok(PeriodicSource { sigma, period })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    /// Mean arrival rate nu = sigma / period in blocks per slot.
    pub fn rate(&self) -> f64 {
        self.sigma / self.period as f64
    }

    /// ln M_A(theta, t).
    pub fn log_mgf(&self, theta: f64, t: u64) -> f64 {
        debug_assert!(theta > 0.0);
        let p = self.period as u64;
        let whole = (t / p) as f64;
        let frac = (t % p) as f64 / p as f64;
        let x = theta * self.sigma;
        x * whole + ln_one_plus_frac_expm1(frac, x)
    }

    /// M_A(theta, t); may overflow to infinity for large arguments, use
    /// [`Self::log_mgf`] in that regime.
    pub fn mgf(&self, theta: f64, t: u64) -> f64 {
        self.log_mgf(theta, t).exp()
    }
}

/// ln(1 + frac (e^x - 1)) without overflow.
fn ln_one_plus_frac_expm1(frac: f64, x: f64) -> f64 {
    if frac == 0.0 {
        return 0.0;
    }
    if x < 700.0 {
        (frac * x.exp_m1()).ln_1p()
    } else {
        x + frac.ln() + ((1.0 - frac) * (-x).exp() / frac).ln_1p()
    }
}

/// A dynamic server with an evaluable MGF.
#[derive(Debug, Clone)]
pub enum ServiceModel {
    /// Fixed-rate server (blocks per slot); mainly for tests and oracles.
    ConstantRate { rate: f64 },
    /// Markov-modulated server from the lumped DOF chain.
    MarkovChain(DofChain),
    /// Statistically independent servers in series.
    Tandem(Vec<ServiceModel>),
}

impl ServiceModel {
    pub fn constant(rate: f64) -> ServiceModel {
        ServiceModel::ConstantRate { rate }
    }

    pub fn chain(chain: DofChain) -> ServiceModel {
        ServiceModel::MarkovChain(chain)
    }

    /// Compose hops left to right; a single-element list is returned
    /// unchanged.
    pub fn compose(mut models: Vec<ServiceModel>) -> ServiceModel {
        assert!(!models.is_empty(), "compose requires at least one hop");
        if models.len() == 1 {
            models.pop().unwrap()
        } else {
            ServiceModel::Tandem(models)
        }
    }

    /// `n` statistically independent copies of this model in series.
    pub fn tandem_of(&self, n: usize) -> ServiceModel {
        assert!(n >= 1);
        ServiceModel::compose(vec![self.clone(); n])
    }

    /// Stationary mean rate in blocks per slot; for a tandem, the minimum
    /// over hops (the bottleneck governs stability).
    pub fn first_order_capacity(&self) -> f64 {
        match self {
            ServiceModel::ConstantRate { rate } => *rate,
            ServiceModel::MarkovChain(chain) => chain.first_order_capacity(),
            ServiceModel::Tandem(hops) => hops
                .iter()
                .map(|h| h.first_order_capacity())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Lazily extended log-MGF sequence at a fixed theta.
    pub fn mgf_seq(&self, theta: f64) -> ServiceMgfSeq {
        assert!(theta > 0.0, "theta must be positive");
        let kind = match self {
            ServiceModel::ConstantRate { rate } => SeqKind::Constant {
                log_step: -theta * rate,
            },
            ServiceModel::MarkovChain(chain) => {
                let k = chain.k_states();
                // QR with R = diag(e^{-theta r_j})
                let mut qr = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..k {
                        qr[i * k + j] = chain.q(i, j) * (-theta * chain.rates()[j]).exp();
                    }
                }
                // start vector pi R
                let v: Vec<f64> = (0..k)
                    .map(|i| chain.pi()[i] * (-theta * chain.rates()[i]).exp())
                    .collect();
                let decay = log_spectral_radius(&qr, k);
                SeqKind::Markov {
                    qr,
                    k,
                    v,
                    cum_log: 0.0,
                    started: false,
                    decay,
                }
            }
            ServiceModel::Tandem(hops) => {
                let parts: Vec<ServiceMgfSeq> = hops.iter().map(|h| h.mgf_seq(theta)).collect();
                let decay = parts
                    .iter()
                    .map(|p| p.decay_rate())
                    .fold(f64::NEG_INFINITY, f64::max);
                let n = parts.len();
                SeqKind::Tandem {
                    parts,
                    scaled: vec![Vec::new(); n],
                    stages: vec![Vec::new(); n - 1],
                    decay,
                }
            }
        };
        let mut seq = ServiceMgfSeq {
            theta,
            kind,
            logs: vec![0.0], // Mbar_S(theta, 0) = 1 by the S(s, s] = 0 convention
        };
        seq.extend_to(1);
        seq
    }

    /// ln Mbar_S(theta, t). Convenience wrapper that builds a fresh
    /// sequence; use [`Self::mgf_seq`] when evaluating many t.
    pub fn log_mgf(&self, theta: f64, t: usize) -> f64 {
        let mut seq = self.mgf_seq(theta);
        seq.log_at(t)
    }

    /// Mbar_S(theta, t) in linear scale.
    pub fn mgf(&self, theta: f64, t: usize) -> f64 {
        self.log_mgf(theta, t).exp()
    }
}

enum SeqKind {
    Constant {
        log_step: f64,
    },
    Markov {
        qr: Vec<f64>,
        k: usize,
        /// current (rescaled) row vector pi R (QR)^{t-1}
        v: Vec<f64>,
        cum_log: f64,
        started: bool,
        decay: f64,
    },
    Tandem {
        parts: Vec<ServiceMgfSeq>,
        /// scaled[p][t] = exp(ln Mbar_p(theta, t) - decay t); bounded since
        /// `decay` is the slowest per-hop rate
        scaled: Vec<Vec<f64>>,
        /// stages[i][t]: scaled convolution of hops 0..=i+1; grows at most
        /// polynomially in t
        stages: Vec<Vec<f64>>,
        decay: f64,
    },
}

impl std::fmt::Debug for SeqKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeqKind::Constant { log_step } => write!(f, "Constant({log_step})"),
            SeqKind::Markov { k, .. } => write!(f, "Markov(k={k})"),
            SeqKind::Tandem { parts, .. } => write!(f, "Tandem({} hops)", parts.len()),
        }
    }
}

/// Log-domain service MGF sequence for one theta, extended on demand and
/// memoized.
#[derive(Debug)]
pub struct ServiceMgfSeq {
    theta: f64,
    kind: SeqKind,
    logs: Vec<f64>,
}

impl ServiceMgfSeq {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Asymptotic per-slot log decay of the sequence (ln of the spectral
    /// radius of R(-theta) Q for a chain; -theta r for a constant server;
    /// the slowest hop for a tandem).
    pub fn decay_rate(&self) -> f64 {
        match &self.kind {
            SeqKind::Constant { log_step } => *log_step,
            SeqKind::Markov { decay, .. } => *decay,
            SeqKind::Tandem { decay, .. } => *decay,
        }
    }

    /// ln Mbar_S(theta, t), extending the memoized sequence if needed.
    pub fn log_at(&mut self, t: usize) -> f64 {
        self.extend_to(t);
        self.logs[t]
    }

    /// Highest t currently memoized.
    pub fn horizon(&self) -> usize {
        self.logs.len() - 1
    }

    fn extend_to(&mut self, t: usize) {
        while self.logs.len() <= t {
            let next_t = self.logs.len();
            let value = match &mut self.kind {
                SeqKind::Constant { log_step } => *log_step * next_t as f64,
                SeqKind::Markov {
                    qr,
                    k,
                    v,
                    cum_log,
                    started,
                    ..
                } => {
                    if !*started {
                        // t = 1: sum of pi R
                        *started = true;
                    } else {
                        let k = *k;
                        let mut w = vec![0.0; k];
                        for i in 0..k {
                            let vi = v[i];
                            if vi == 0.0 {
                                continue;
                            }
                            for j in 0..k {
                                w[j] += vi * qr[i * k + j];
                            }
                        }
                        *v = w;
                    }
                    let total: f64 = v.iter().sum();
                    debug_assert!(total > 0.0);
                    *cum_log += total.ln();
                    let inv = 1.0 / total;
                    for x in v.iter_mut() {
                        *x *= inv;
                    }
                    *cum_log
                }
                SeqKind::Tandem {
                    parts,
                    scaled,
                    stages,
                    decay,
                } => {
                    let decay = *decay;
                    for (part, cache) in parts.iter_mut().zip(scaled.iter_mut()) {
                        for t in cache.len()..=next_t {
                            cache.push((part.log_at(t) - decay * t as f64).exp());
                        }
                    }
                    let n_parts = parts.len();
                    for idx in 0..n_parts - 1 {
                        // extend stage idx (conv of hops 0..=idx+1) to next_t
                        let (lower, rest) = stages.split_at_mut(idx);
                        let stage = &mut rest[0];
                        let left: &[f64] = if idx == 0 {
                            &scaled[0]
                        } else {
                            &lower[idx - 1]
                        };
                        let right = &scaled[idx + 1];
                        for t_new in stage.len()..=next_t {
                            let mut acc = 0.0;
                            for u in 0..=t_new {
                                acc += left[u] * right[t_new - u];
                            }
                            stage.push(acc);
                        }
                    }
                    let top = stages[n_parts - 2][next_t];
                    top.ln() + decay * next_t as f64
                }
            };
            self.logs.push(value);
        }
    }
}

/// ln of the spectral radius of a nonnegative matrix, via power iteration
/// on A + I (the shift keeps the iteration convergent for periodic chains;
/// spectra shift exactly).
fn log_spectral_radius(a: &[f64], k: usize) -> f64 {
    let mut v = vec![1.0 / k as f64; k];
    let mut lam = 1.0;
    for _ in 0..4000 {
        let mut w = vec![0.0; k];
        for i in 0..k {
            let vi = v[i];
            for j in 0..k {
                w[j] += vi * a[i * k + j];
            }
            w[i] += vi;
        }
        let total: f64 = w.iter().sum();
        let prev = lam;
        lam = total;
        let inv = 1.0 / total;
        for x in w.iter_mut() {
            *x *= inv;
        }
        v = w;
        if (lam - prev).abs() <= 1e-15 * lam {
            break;
        }
    }
    (lam - 1.0).max(f64::MIN_POSITIVE).ln()
}
