//! Flow-level delay analysis of spatial-multiplexing MIMO wireless channels.
//!
//! The crate models each transmit/receive antenna pair as a two-state
//! Gilbert-Elliott path, lumps the resulting product chain into a small
//! Markov service model keyed by the available degrees of freedom, and
//! computes probabilistic delay bounds `P[W > d] < eps` with moment
//! generating functions (Chernoff-style network calculus). A discrete-time
//! FIFO queue simulator provides an independent check of every bound.
//!
//! Modules:
//! - [`ge`]: per-path Gilbert-Elliott chain and fading-speed control
//! - [`channel`]: finite-scatterer channel realizations and log-det capacity
//! - [`dof`]: sub-state enumeration, DOF classification, lumped service chain
//! - [`mgf`]: arrival/service MGFs and multi-hop composition
//! - [`solver`]: the double-infimum delay bound with certified tail truncation
//! - [`sim`]: discrete-time FIFO queue simulator (empirical oracle)
//! - [`units`], [`config`], [`experiment`]: 802.11n parameterization, sweeps, CSV

pub mod channel;
pub mod config;
pub mod dof;
pub mod experiment;
pub mod ge;
mod linalg;
pub mod mgf;
pub mod sim;
pub mod solver;
pub mod units;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid probability {name} = {value}, must lie in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("degenerate Gilbert-Elliott chain: p_gb + p_bg must be positive")]
    DegenerateChain,

    #[error("fading speed target omega = {omega} with p_bg = {p_bg} implies p_gb = {p_gb} > 1")]
    FadingSpeedOutOfRange { omega: f64, p_bg: f64, p_gb: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("channel matrix is {got_rx}x{got_tx} but the sub-state expects {want_rx}x{want_tx}")]
    DimensionMismatch {
        got_rx: usize,
        got_tx: usize,
        want_rx: usize,
        want_tx: usize,
    },

    #[error("sub-state enumeration over {bits} paths exceeds the cap of {cap} bits")]
    EnumerationCap { bits: usize, cap: usize },

    #[error("class rates must have length {expected} with rates[0] = 0")]
    BadClassRates { expected: usize },

    #[error("infeasible: arrival rate {nu} blocks/slot is not below the first-order capacity {capacity}")]
    Infeasible { nu: f64, capacity: f64 },

    #[error("non-convergent: {0}")]
    NonConvergent(String),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
