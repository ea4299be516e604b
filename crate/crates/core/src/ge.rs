//! Two-state Gilbert-Elliott model of a single spatial path.
//!
//! A path is either good (error-free transmission) or bad (unsuccessful
//! transmission). Transitions happen at slot boundaries and the state is
//! constant within a slot (block fading). The long-run probability of a
//! bad slot, i.e. the block error probability of the path, is
//!
//!   omega = p_gb / (p_gb + p_bg)

use crate::{Error, Result};

/// State of one spatial path for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathState {
    Good,
    Bad,
}

/// Per-slot transition probabilities of one Gilbert-Elliott path.
///
/// `p_gb` is the probability of leaving the good state, `p_bg` of leaving
/// the bad state. Both may be 1 (periodic flip-flop chains are allowed),
/// but they must not both be 0 or the stationary distribution is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeParams {
    p_gb: f64,
    p_bg: f64,
}

impl GeParams {
    pub fn new(p_gb: f64, p_bg: f64) -> Result<Self> {
        check_probability("p_gb", p_gb)?;
        check_probability("p_bg", p_bg)?;
        if p_gb + p_bg == 0.0 {
            return Err(Error::DegenerateChain);
        }
        Ok(GeParams { p_gb, p_bg })
    }

    /// Parameters with a prescribed block error probability `omega` and
    /// bad-to-good probability `p_bg`, used to control the fading speed
    /// while keeping omega fixed: a small `p_bg` means slow fading.
    pub fn for_fading_speed(omega: f64, p_bg: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::InvalidProbability {
                name: "omega",
                value: omega,
            });
        }
        if !(p_bg > 0.0 && p_bg <= 1.0) {
            return Err(Error::InvalidProbability {
                name: "p_bg",
                value: p_bg,
            });
        }
        let p_gb = p_bg * omega / (1.0 - omega);
        if p_gb > 1.0 {
            return Err(Error::FadingSpeedOutOfRange { omega, p_bg, p_gb });
        }
        Ok(GeParams { p_gb, p_bg })
    }

    pub fn p_gb(&self) -> f64 {
        self.p_gb
    }

    pub fn p_bg(&self) -> f64 {
        self.p_bg
    }

    /// Block error probability omega = p_gb / (p_gb + p_bg).
    pub fn block_error_prob(&self) -> f64 {
        self.p_gb / (self.p_gb + self.p_bg)
    }

    /// Stationary distribution [P(good), P(bad)] = [1 - omega, omega].
    pub fn stationary(&self) -> [f64; 2] {
        let omega = self.block_error_prob();
        [1.0 - omega, omega]
    }

    /// Advance one slot. `u` is a uniform sample from [0, 1).
    pub fn step(&self, state: PathState, u: f64) -> PathState {
        match state {
            PathState::Good => {
                if u < self.p_gb {
                    PathState::Bad
                } else {
                    PathState::Good
                }
            }
            PathState::Bad => {
                if u < self.p_bg {
                    PathState::Good
                } else {
                    PathState::Bad
                }
            }
        }
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_error_prob_examples() {
        let p = GeParams::new(0.01, 0.1).unwrap();
        assert!((p.block_error_prob() - 1.0 / 11.0).abs() < 1e-15);

        let p = GeParams::new(0.0, 0.1).unwrap();
        assert_eq!(p.block_error_prob(), 0.0);

        for x in [0.3, 0.05, 1.0] {
            let p = GeParams::new(x, x).unwrap();
            assert_eq!(p.block_error_prob(), 0.5);
        }
    }

    #[test]
    fn degenerate_chain_rejected() {
        assert!(matches!(GeParams::new(0.0, 0.0), Err(Error::DegenerateChain)));
        assert!(GeParams::new(1.0, 1.0).is_ok());
        assert!(GeParams::new(-0.1, 0.5).is_err());
        assert!(GeParams::new(0.5, 1.5).is_err());
    }

    #[test]
    fn fading_speed_examples() {
        let p = GeParams::for_fading_speed(1.0 / 11.0, 0.1).unwrap();
        assert!((p.p_gb() - 0.01).abs() < 1e-16);
        assert_eq!(p.p_bg(), 0.1);

        let p = GeParams::for_fading_speed(0.5, 0.2).unwrap();
        assert!((p.p_gb() - 0.2).abs() < 1e-16);

        let p = GeParams::for_fading_speed(1.0 / 11.0, 0.001).unwrap();
        assert!((p.p_gb() - 0.0001).abs() < 1e-18);
    }

    #[test]
    fn fading_speed_range_error() {
        // omega = 0.95 with p_bg = 0.5 would need p_gb = 9.5
        assert!(matches!(
            GeParams::for_fading_speed(0.95, 0.5),
            Err(Error::FadingSpeedOutOfRange { .. })
        ));
        assert!(GeParams::for_fading_speed(0.0, 0.1).is_err());
        assert!(GeParams::for_fading_speed(1.0, 0.1).is_err());
        assert!(GeParams::for_fading_speed(0.5, 0.0).is_err());
    }

    /// block_error_prob of for_fading_speed(omega, .) recovers omega.
    #[test]
    fn fading_speed_roundtrip_identity() {
        for &omega in &[0.01, 1.0 / 11.0, 0.3, 0.5, 0.9] {
            for &p_bg in &[1e-3, 1e-2, 0.1, 1.0] {
                if let Ok(p) = GeParams::for_fading_speed(omega, p_bg) {
                    let back = p.block_error_prob();
                    assert!(
                        (back - omega).abs() <= 4.0 * f64::EPSILON * omega,
                        "omega {omega} p_bg {p_bg}: got {back}"
                    );
                }
            }
        }
    }

    #[test]
    fn step_degenerate_cases() {
        let frozen = GeParams::new(0.0, 0.1).unwrap();
        for u in [0.0, 0.5, 0.999] {
            assert_eq!(frozen.step(PathState::Good, u), PathState::Good);
        }
        let always_recover = GeParams::new(0.3, 1.0).unwrap();
        for u in [0.0, 0.5, 0.999] {
            assert_eq!(always_recover.step(PathState::Bad, u), PathState::Good);
        }
    }

    /// Long-run fraction of bad slots matches omega. The tolerance is
    /// 3 sigma of the correlated occupancy estimator: for a two-state
    /// chain, var = omega(1-omega)(1+rho)/((1-rho) n) with
    /// rho = 1 - p_gb - p_bg.
    #[test]
    fn long_run_bad_fraction() {
        let p = GeParams::new(0.01, 0.1).unwrap();
        let omega = p.block_error_prob();
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e_617468);
        let mut state = PathState::Good;
        let mut bad = 0u64;
        for _ in 0..n {
            state = p.step(state, rng.gen::<f64>());
            if state == PathState::Bad {
                bad += 1;
            }
        }
        let freq = bad as f64 / n as f64;
        let rho = 1.0 - p.p_gb() - p.p_bg();
        let sigma = (omega * (1.0 - omega) * (1.0 + rho) / ((1.0 - rho) * n as f64)).sqrt();
        assert!(
            (freq - omega).abs() < 3.0 * sigma,
            "freq {freq} vs omega {omega} (3 sigma = {})",
            3.0 * sigma
        );
    }

    /// Solve the 2x2 balance equations numerically and compare with the
    /// closed-form stationary vector (1-omega, omega).
    #[test]
    fn stationary_solves_balance_equations() {
        for &(p_gb, p_bg) in &[(0.01, 0.1), (0.5, 0.25), (1.0, 1.0), (0.001, 0.999)] {
            let p = GeParams::new(p_gb, p_bg).unwrap();
            // pi = pi Q with Q = [[1-p_gb, p_gb], [p_bg, 1-p_bg]]:
            // fixed-point iteration from an arbitrary start.
            let mut pi = [0.3, 0.7];
            for _ in 0..200_000 {
                let next = [
                    pi[0] * (1.0 - p_gb) + pi[1] * p_bg,
                    pi[0] * p_gb + pi[1] * (1.0 - p_bg),
                ];
                // damped update so periodic chains (p = 1) also converge
                pi = [0.5 * (pi[0] + next[0]), 0.5 * (pi[1] + next[1])];
            }
            let expected = p.stationary();
            assert!((pi[0] - expected[0]).abs() < 1e-12, "{p_gb},{p_bg}: {pi:?}");
            assert!((pi[1] - expected[1]).abs() < 1e-12);
        }
    }
}
