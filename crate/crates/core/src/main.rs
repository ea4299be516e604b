use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mimo_snc::config::ExperimentConfig;
use mimo_snc::experiment::{self, CommandOutput};
use std::path::PathBuf;

/// Flow-level delay bounds for spatial-multiplexing MIMO channels.
#[derive(Parser, Debug)]
#[command(name = "mimo-snc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Config file (flat `key = value`, `#` comments); flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed; reruns with the same seed are byte-identical.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Antenna counts N for N x N systems, e.g. `2,3,4`.
    #[arg(long, value_delimiter = ',', global = true)]
    n_antennas: Option<Vec<usize>>,

    /// Receiver SNR values in dB.
    #[arg(long, value_delimiter = ',', global = true)]
    snr_db: Option<Vec<f64>>,

    /// Good-to-bad transition probability per slot.
    #[arg(long, global = true)]
    p_gb: Option<f64>,

    /// Bad-to-good transition probabilities (fading-speed sweep).
    #[arg(long, value_delimiter = ',', global = true)]
    p_bg: Option<Vec<f64>>,

    /// Violation probabilities, e.g. `1e-2,1e-4,1e-6`.
    #[arg(long, value_delimiter = ',', global = true)]
    epsilon: Option<Vec<f64>>,

    /// Arrival rates in Mbps.
    #[arg(long, value_delimiter = ',', global = true)]
    rate_mbps: Option<Vec<f64>>,

    /// Arrival period in slots.
    #[arg(long, global = true)]
    period: Option<u32>,

    /// Hop counts for the multihop command.
    #[arg(long, value_delimiter = ',', global = true)]
    hops: Option<Vec<usize>>,

    /// Monte-Carlo samples per sub-state.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Simulator slots (validate command).
    #[arg(long, global = true)]
    sim_slots: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-class service rates and first-order capacity per antenna count.
    Capacity(Overrides),
    /// Delay-bound sweeps over antennas, epsilon, arrival rate, SNR, p_bg.
    DelayBound(Overrides),
    /// End-to-end delay bounds over hop counts.
    Multihop(Overrides),
    /// Check every analytic bound against the discrete-time simulator.
    Validate(Overrides),
    /// Scan the SNR so the N x N first-order capacity hits a target.
    Calibrate {
        #[command(flatten)]
        overrides: Overrides,
        /// Target first-order capacity in bits/s/Hz.
        #[arg(long, default_value_t = 7.25)]
        target: f64,
    },
    /// Print the effective configuration and its hash.
    ShowConfig(Overrides),
}

fn build_config(ov: &Overrides) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &ov.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &ov.n_antennas {
        cfg.n_antennas = v.clone();
    }
    if let Some(v) = &ov.snr_db {
        cfg.snr_db = v.clone();
    }
    if let Some(v) = ov.p_gb {
        cfg.p_gb = v;
    }
    if let Some(v) = &ov.p_bg {
        cfg.p_bg = v.clone();
    }
    if let Some(v) = &ov.epsilon {
        cfg.epsilon = v.clone();
    }
    if let Some(v) = &ov.rate_mbps {
        cfg.arrival_rate_mbps = v.clone();
    }
    if let Some(v) = ov.period {
        cfg.period_slots = v;
    }
    if let Some(v) = &ov.hops {
        cfg.hops = v.clone();
    }
    if let Some(v) = ov.samples {
        cfg.n_mc_samples = v;
    }
    if let Some(v) = ov.seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = ov.sim_slots {
        cfg.sim_slots = v;
    }
    if let Some(v) = &ov.out {
        cfg.output = Some(v.clone());
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig, out: CommandOutput) -> anyhow::Result<i32> {
    match &cfg.output {
        Some(path) => std::fs::write(path, &out.csv)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", out.csv),
    }
    Ok(out.exit_code())
}

fn run() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Capacity(ov) => {
            let cfg = build_config(ov)?;
            emit(&cfg, experiment::cmd_capacity(&cfg)?)
        }
        Command::DelayBound(ov) => {
            let cfg = build_config(ov)?;
            emit(&cfg, experiment::cmd_delay_bound(&cfg)?)
        }
        Command::Multihop(ov) => {
            let cfg = build_config(ov)?;
            emit(&cfg, experiment::cmd_multihop(&cfg)?)
        }
        Command::Validate(ov) => {
            let cfg = build_config(ov)?;
            emit(&cfg, experiment::cmd_validate(&cfg)?)
        }
        Command::Calibrate { overrides, target } => {
            let cfg = build_config(overrides)?;
            let n = cfg.n_antennas[0];
            let cal = experiment::calibrate_snr(&cfg, n, *target)?;
            let csv = format!(
                "n_antennas,snr_db,target_bits_per_s_hz,achieved_bits_per_s_hz,std_err_bits\n{},{},{},{},{}\n",
                cal.n_antennas, cal.snr_db, cal.target_bits, cal.achieved_bits, cal.std_err_bits
            );
            emit(
                &cfg,
                CommandOutput {
                    csv,
                    rows: 1,
                    feasible_rows: 1,
                    all_pass: true,
                },
            )
        }
        Command::ShowConfig(ov) => {
            let cfg = build_config(ov)?;
            print!("{}", cfg.canonical_string());
            println!("# sha256 = {}", cfg.hash());
            Ok(0)
        }
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
