//! `secrecy` — compute, optimize and certify secrecy rate regions of
//! Gaussian multi-receiver wiretap channels from the command line.
//!
//! Exit codes: 0 when all requested residuals sit within tolerance,
//! 1 on a tolerance failure, 2 on malformed input.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "secrecy",
    about = "Secrecy capacity regions of Gaussian multi-receiver wiretap channels",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// RNG seed (falls back to the SECRECY_SEED environment variable, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit rates in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// PSD membership tolerance override.
    #[arg(long = "tol-psd", global = true)]
    tol_psd: Option<f64>,
    /// Residual tolerance override.
    #[arg(long = "tol-residual", global = true)]
    tol_residual: Option<f64>,
    /// Root bracket tolerance override.
    #[arg(long = "tol-root", global = true)]
    tol_root: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the two-user scalar region over the power split α.
    Siso {
        #[command(flatten)]
        common: CommonOpts,
        /// Input power budget.
        #[arg(long)]
        power: f64,
        /// Noise variance of the stronger receiver.
        #[arg(long)]
        sigma1_sq: f64,
        /// Noise variance of the weaker receiver.
        #[arg(long)]
        sigma2_sq: f64,
        /// Eavesdropper noise variance.
        #[arg(long)]
        sigmaz_sq: f64,
        /// Number of α grid points (≥ 2).
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Sweep the region boundary over a weight grid, emitting one boundary
    /// point per weight vector plus a certificate file per point.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Channel spec (JSON).
        #[arg(long)]
        channel: std::path::PathBuf,
        /// Weight-grid resolution per user (≥ 2).
        #[arg(long, default_value_t = 11)]
        weights: usize,
        /// Descending α ladder for general channels, comma separated.
        #[arg(long = "alpha-ladder", default_value = "1e-1,1e-2,1e-3,1e-4")]
        alpha_ladder: String,
        /// Random restarts per boundary point.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Skip the per-point certificate files.
        #[arg(long)]
        no_certificates: bool,
    },
    /// Evaluate secrecy (and dummy) rates for a channel and partition.
    Rates {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        channel: std::path::PathBuf,
        /// Partition file: JSON array of row-major matrices.
        #[arg(long)]
        partition: std::path::PathBuf,
        /// Encoding order as comma-separated user indices (0-based);
        /// identity when omitted.
        #[arg(long)]
        order: Option<String>,
    },
    /// Check the KKT system for a partition under given weights.
    Kkt {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        channel: std::path::PathBuf,
        #[arg(long)]
        partition: std::path::PathBuf,
        /// Comma-separated non-negative weights.
        #[arg(long)]
        weights: String,
    },
    /// Build and verify the enhanced degraded channel at a stationary
    /// partition; writes a self-contained certificate.
    Enhance {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        channel: std::path::PathBuf,
        #[arg(long)]
        partition: std::path::PathBuf,
        #[arg(long)]
        weights: String,
        /// Random-partition samples for the touching-point search
        /// (0 disables the search).
        #[arg(long, default_value_t = 100_000)]
        search_samples: usize,
    },
    /// Numerical checks of the information identities and inequalities.
    Estimate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(subcommand)]
        what: EstimateCommand,
    },
    /// Report every violated structural assumption of a channel spec.
    Validate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        channel: std::path::PathBuf,
    },
}

#[derive(Subcommand, Clone)]
enum EstimateCommand {
    /// Entropy derivative vs half Fisher information.
    Debruijn {
        #[arg(long)]
        mixture: std::path::PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Mutual-information increment vs the half-integral of the MMSE.
    Immse {
        #[arg(long)]
        mixture: std::path::PathBuf,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
    },
    /// Fisher information vs `1 − t·mmse`.
    Complementary {
        #[arg(long)]
        mixture: std::path::PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Single-crossing sign pattern of `σ²/(σ²t+1) − mmse(X,t|U)`.
    Crossing {
        #[arg(long)]
        mixture: std::path::PathBuf,
        #[arg(long)]
        sigma_sq: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
    /// Gaussian-is-worst-signal comparison at fixed covariance.
    WorstNoise {
        #[arg(long)]
        mixture: std::path::PathBuf,
        /// Noise covariance, row-major JSON.
        #[arg(long)]
        sigma: String,
        /// Target signal covariance, row-major JSON.
        #[arg(long)]
        cov: String,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Stein, Cramér–Rao, FII, Fisher-shift and Markov-conditioning suite.
    FisherIneq {
        #[arg(long)]
        mixture: std::path::PathBuf,
        /// Second mixture, conditionally independent given the same branch
        /// structure.
        #[arg(long)]
        mixture_y: std::path::PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Construct and verify the interpolating covariance K*.
    Kstar {
        #[arg(long)]
        mixture: std::path::PathBuf,
        /// Noise covariances and input budget, row-major JSON.
        #[arg(long)]
        sigma1: String,
        #[arg(long)]
        sigma2: String,
        #[arg(long)]
        sigmaz: String,
        #[arg(long)]
        cap: String,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Siso {
            common,
            power,
            sigma1_sq,
            sigma2_sq,
            sigmaz_sq,
            steps,
        } => commands::siso(&common, power, sigma1_sq, sigma2_sq, sigmaz_sq, steps),
        Command::Sweep {
            common,
            channel,
            weights,
            alpha_ladder,
            restarts,
            no_certificates,
        } => commands::sweep(
            &common,
            &channel,
            weights,
            &alpha_ladder,
            restarts,
            no_certificates,
        ),
        Command::Rates {
            common,
            channel,
            partition,
            order,
        } => commands::rates(&common, &channel, &partition, order.as_deref()),
        Command::Kkt {
            common,
            channel,
            partition,
            weights,
        } => commands::kkt(&common, &channel, &partition, &weights),
        Command::Enhance {
            common,
            channel,
            partition,
            weights,
            search_samples,
        } => commands::enhance(&common, &channel, &partition, &weights, search_samples),
        Command::Estimate { common, what } => commands::estimate(&common, &what),
        Command::Validate { common, channel } => commands::validate(&common, &channel),
    };
    match outcome {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(err.exit_code())
        }
    }
}
