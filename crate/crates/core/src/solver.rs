//! Stochastic delay bounds by double infimum over theta and tau.
//!
//! The bound d with `P[W > d] < eps` is the smallest tau such that
//!
//!   G(tau) = sum_{s = tau}^inf M_A(theta, s - tau) Mbar_S(theta, s) <= eps
//!
//! for some theta > 0. For the periodic source, M_A(theta, k P + r) =
//! e^{theta sigma k} phi(r) with phi(r) = 1 + (r/P)(e^{theta sigma} - 1),
//! which turns G into a short sum over the phase r of
//!
//!   V(x) = sum_{k >= 0} e^{theta sigma k} Mbar_S(theta, x + k P),
//!
//! computed by the backward recursion V(x) = Mbar_S(x) + e^{theta sigma}
//! V(x + P). The infinite part of V is certified geometrically: once the
//! period-to-period summand ratio e^{theta sigma} Mbar_S(s + P)/Mbar_S(s)
//! has stayed below one for a configured number of consecutive periods,
//! the remaining tail is bounded by the last term times qhat/(1 - qhat)
//! and carried along as `tail_error`, so the reported bound includes the
//! truncation error. (A slot-level ratio test cannot work here: the
//! arrival MGF jumps by e^{theta sigma} at every period boundary, so
//! consecutive slot summand ratios exceed one periodically even deep in
//! the convergent regime.)

use crate::mgf::{PeriodicSource, ServiceModel};
use crate::{Error, Result};
use rayon::prelude::*;

/// Search-space and truncation parameters for the bound solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Coarse theta grid: log-spaced candidates on [theta_min, theta_max].
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
    /// Golden-section refinement iterations around the best grid theta
    /// (0 disables refinement).
    pub refine_iters: usize,
    /// Hard horizon for the service MGF sequence (slots).
    pub t_max: usize,
    /// Required relative size of the certified tail at the accepted tau.
    pub rel_tail_tol: f64,
    /// Largest tau considered feasible.
    pub tau_max: usize,
    /// Consecutive decaying periods required before the geometric tail
    /// estimate is trusted.
    pub decay_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            theta_min: 1e-4,
            theta_max: 10.0,
            theta_points: 64,
            refine_iters: 24,
            t_max: 200_000,
            rel_tail_tol: 1e-9,
            tau_max: 100_000,
            decay_window: 4,
        }
    }
}

/// A computed delay bound: P[W > d_slots] < epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBound {
    /// The bound in slots.
    pub d_slots: usize,
    /// The optimizing theta.
    pub theta_star: f64,
    /// Target violation probability.
    pub epsilon: f64,
    /// True when the defining inequality was re-verified at
    /// (theta_star, d_slots) including the tail contribution.
    pub feasible: bool,
    /// Certified upper bound on the truncated tail of the sum at the
    /// accepted (theta_star, d_slots), in linear scale.
    pub tail_error: f64,
}

impl DelayBound {
    pub fn d_ms(&self, slot_us: f64) -> f64 {
        self.d_slots as f64 * slot_us / 1000.0
    }
}

#[derive(Debug, Clone, Copy)]
enum ThetaOutcome {
    Feasible { tau: usize, log_tail: f64 },
    /// Sums converge at this theta but no tau <= tau_cap satisfies the bound.
    NoTau,
    /// The summand ratio never certified geometric decay before t_max.
    NonConvergent,
}

/// First-order capacity of the service minus the arrival rate, in blocks
/// per slot. For a tandem the bottleneck hop governs.
pub fn stability_margin(arrival: &PeriodicSource, service: &ServiceModel) -> f64 {
    service.first_order_capacity() - arrival.rate()
}

/// Compute the delay bound d = inf_theta inf{tau : G(tau) <= eps}.
pub fn delay_bound(
    arrival: &PeriodicSource,
    service: &ServiceModel,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<DelayBound> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    let margin = stability_margin(arrival, service);
    if margin <= 0.0 {
        return Err(Error::Infeasible {
            nu: arrival.rate(),
            capacity: service.first_order_capacity(),
        });
    }

    let thetas = theta_grid(cfg);
    let outcomes: Vec<ThetaOutcome> = thetas
        .par_iter()
        .map(|&theta| solve_theta(arrival, service, theta, epsilon, cfg, cfg.tau_max))
        .collect();

    let mut best: Option<(usize, f64, f64)> = None; // (tau, theta, log_tail)
    let mut best_idx = None;
    for (i, out) in outcomes.iter().enumerate() {
        if let ThetaOutcome::Feasible { tau, log_tail } = *out {
            if best.map_or(true, |(bt, _, _)| tau < bt) {
                best = Some((tau, thetas[i], log_tail));
                best_idx = Some(i);
            }
        }
    }

    let (mut d, mut theta_star, mut log_tail) = match best {
        Some(b) => b,
        None => {
            let any_no_tau = outcomes
                .iter()
                .any(|o| matches!(o, ThetaOutcome::NoTau));
            return if any_no_tau {
                Err(Error::Infeasible {
                    nu: arrival.rate(),
                    capacity: service.first_order_capacity(),
                })
            } else {
                Err(Error::NonConvergent(format!(
                    "no theta in [{}, {}] certified geometric decay within t_max = {}",
                    cfg.theta_min, cfg.theta_max, cfg.t_max
                )))
            };
        }
    };

    // Golden-section refinement between the grid neighbors of the winner.
    if cfg.refine_iters > 0 {
        let i = best_idx.unwrap();
        let lo = thetas[i.saturating_sub(1)];
        let hi = thetas[(i + 1).min(thetas.len() - 1)];
        if hi > lo {
            let (mut a, mut b) = (lo.ln(), hi.ln());
            let inv_phi = 0.618_033_988_749_894_9;
            let eval = |log_theta: f64, tau_cap: usize| -> (usize, f64) {
                let theta = log_theta.exp();
                match solve_theta(arrival, service, theta, epsilon, cfg, tau_cap) {
                    ThetaOutcome::Feasible { tau, log_tail } => (tau, log_tail),
                    _ => (usize::MAX, f64::NAN),
                }
            };
            let mut c = b - inv_phi * (b - a);
            let mut e = a + inv_phi * (b - a);
            let mut fc = eval(c, d);
            let mut fe = eval(e, d);
            for _ in 0..cfg.refine_iters {
                for (log_theta, f) in [(c, fc), (e, fe)] {
                    if f.0 < d {
                        d = f.0;
                        theta_star = log_theta.exp();
                        log_tail = f.1;
                    }
                }
                if fc.0 <= fe.0 {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - inv_phi * (b - a);
                    fc = eval(c, d);
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + inv_phi * (b - a);
                    fe = eval(e, d);
                }
            }
        }
    }

    // Re-verify the defining inequality at (theta_star, d) before returning.
    let verify = solve_theta(arrival, service, theta_star, epsilon, cfg, d);
    let feasible = matches!(verify, ThetaOutcome::Feasible { tau, .. } if tau <= d);
    debug_assert!(feasible, "bound failed re-verification");

    Ok(DelayBound {
        d_slots: d,
        theta_star,
        epsilon,
        feasible,
        tail_error: log_tail.exp(),
    })
}

/// Delay bounds for 1..=eta_max identical independent hops, at the same
/// epsilon. Equivalent to calling [`delay_bound`] on each tandem.
pub fn multihop_delay_bounds(
    arrival: &PeriodicSource,
    hop: &ServiceModel,
    etas: &[usize],
    epsilon: f64,
    cfg: &SolverConfig,
) -> Vec<Result<DelayBound>> {
    etas.iter()
        .map(|&eta| delay_bound(arrival, &hop.tandem_of(eta), epsilon, cfg))
        .collect()
}

fn theta_grid(cfg: &SolverConfig) -> Vec<f64> {
    let n = cfg.theta_points.max(2);
    let (lo, hi) = (cfg.theta_min.ln(), cfg.theta_max.ln());
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// log(e^a + e^b) without overflow.
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Inner infimum over tau for a fixed theta.
fn solve_theta(
    arrival: &PeriodicSource,
    service: &ServiceModel,
    theta: f64,
    epsilon: f64,
    cfg: &SolverConfig,
    tau_cap: usize,
) -> ThetaOutcome {
    let p = arrival.period() as usize;
    let nu = arrival.rate();
    let ln_eps = epsilon.ln();
    let ln_rel_tol = cfg.rel_tail_tol.ln();
    let x = theta * arrival.sigma(); // per-period arrival exponent

    let mut seq = service.mgf_seq(theta);

    // Divergence pre-screen: the summand ratio tends to
    // e^{theta nu + decay_rate} per slot; at or above one the sum diverges.
    if theta * nu + seq.decay_rate() >= -1e-12 {
        return ThetaOutcome::NonConvergent;
    }

    // phi(r) = M_A(theta, r) for r = 0..P-1 (log scale)
    let phi_log: Vec<f64> = (0..p as u64).map(|r| arrival.log_mgf(theta, r)).collect();

    let cert_len = cfg.decay_window.max(1) * p;
    let mut t_top = (8 * p).max(1024).min(cfg.t_max);
    let mut tau_resume = 0usize;
    loop {
        // Service values for t in [0, t_top + P).
        let horizon = t_top + p;
        if horizon > cfg.t_max + p {
            return ThetaOutcome::NonConvergent;
        }
        seq.log_at(horizon - 1);

        // Certify geometric decay of the period-aggregated summand over the
        // trailing window: qhat = max e^{theta sigma} S(s+P)/S(s).
        if t_top < cert_len + p {
            if t_top >= cfg.t_max {
                return ThetaOutcome::NonConvergent;
            }
            t_top = (t_top * 2).min(cfg.t_max);
            continue;
        }
        let mut log_qhat = f64::NEG_INFINITY;
        for s in (t_top - cert_len)..t_top {
            let r = x + seq.log_at(s + p) - seq.log_at(s);
            if r > log_qhat {
                log_qhat = r;
            }
        }
        if log_qhat >= 0.0 {
            if t_top >= cfg.t_max {
                return ThetaOutcome::NonConvergent;
            }
            t_top = (t_top * 2).min(cfg.t_max);
            continue;
        }
        // ln(qhat / (1 - qhat))
        let log_tail_factor = log_qhat - (-log_qhat.exp()).ln_1p();

        // Backward recursion for V and its certified tail over [0, t_top).
        let mut log_v = vec![0.0f64; t_top];
        let mut log_v_tail = vec![0.0f64; t_top];
        for xi in (0..t_top).rev() {
            let ls = seq.log_at(xi);
            if xi + p >= t_top {
                log_v[xi] = ls;
                log_v_tail[xi] = ls + log_tail_factor;
            } else {
                log_v[xi] = log_add_exp(ls, x + log_v[xi + p]);
                log_v_tail[xi] = x + log_v_tail[xi + p];
            }
        }

        // Scan tau upward; G decreases in tau, so the first feasible tau is
        // the infimum.
        let tau_hi = tau_cap.min(t_top.saturating_sub(p));
        let mut need_extend = false;
        while tau_resume <= tau_hi {
            let tau = tau_resume;
            let mut log_g = f64::NEG_INFINITY;
            let mut log_gt = f64::NEG_INFINITY;
            for r in 0..p {
                log_g = log_add_exp(log_g, phi_log[r] + log_v[tau + r]);
                log_gt = log_add_exp(log_gt, phi_log[r] + log_v_tail[tau + r]);
            }
            if log_add_exp(log_g, log_gt) <= ln_eps {
                if log_gt <= log_g + ln_rel_tol {
                    return ThetaOutcome::Feasible {
                        tau,
                        log_tail: log_gt,
                    };
                }
                // Feasible but the tail estimate is too coarse; push the
                // certified band further out and re-evaluate this tau.
                need_extend = true;
                break;
            }
            tau_resume += 1;
        }
        if !need_extend && tau_resume > tau_cap {
            return ThetaOutcome::NoTau;
        }
        if t_top >= cfg.t_max {
            // Cannot extend further; unresolved tails count as
            // non-convergence, an unresolved tau range as no feasible tau.
            return if need_extend {
                ThetaOutcome::NonConvergent
            } else {
                ThetaOutcome::NoTau
            };
        }
        t_top = (t_top * 2).min(cfg.t_max);
    }
}
