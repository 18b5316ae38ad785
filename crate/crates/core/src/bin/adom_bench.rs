//! Benchmark CLI for decentralized dual-accelerated optimization runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adom::bench::{self, BenchError};
use adom::config::RunConfig;

#[derive(Parser)]
#[command(name = "adom-bench", about = "Run, sweep, and self-check decentralized optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to a sectioned key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV artifacts; nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the oracle and network seeds from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the iteration count from the config.
    #[arg(long)]
    steps: Option<usize>,
    /// Suppress per-run progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run and write its per-iteration trace.
    Run(Common),
    /// Run the configured grid of condition numbers and write a summary.
    Sweep(Common),
    /// Self-check: enforce the per-step inequalities on random instances.
    Check {
        /// Number of random quadratic instances.
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on the dual step size; values far from 1 must fail.
        #[arg(long, default_value_t = 1.0)]
        theta_scale: f64,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the spectral bounds of the configured network schedule.
    Spectrum(Common),
}

fn load(common: &Common) -> Result<RunConfig, BenchError> {
    let mut cfg = RunConfig::from_path(&common.config)?;
    bench::apply_overrides(&mut cfg, common.seed, common.steps);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, BenchError> = match &cli.command {
        Command::Run(common) => load(common).and_then(|cfg| {
            bench::cli_run(&cfg, common.out.as_deref(), common.quiet).map(|_| true)
        }),
        Command::Sweep(common) => load(common).and_then(|cfg| {
            bench::cli_sweep(&cfg, common.out.as_deref(), common.quiet)
                .map(|rows| rows.iter().all(|r| r.error.is_none()))
        }),
        Command::Check {
            instances,
            steps,
            seed,
            theta_scale,
            quiet,
        } => bench::cli_check(*instances, *steps, *seed, *theta_scale, *quiet)
            .map(|report| report.passed()),
        Command::Spectrum(common) => load(common)
            .and_then(|cfg| bench::cli_spectrum(&cfg, common.quiet).map(|_| true)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
