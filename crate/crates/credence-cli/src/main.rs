use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use credence_cli::config::RunConfig;
use credence_cli::{cmd_attack, cmd_credibility, cmd_filter_curve, cmd_gamma_sweep, cmd_verify};

/// Credibility profiles for classifier predictions: solve, filter, attack,
/// sweep, and verify.
#[derive(Parser)]
#[command(name = "credence", version, about)]
struct Cli {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for per-sample work. Results are independent of this.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the counterfactual problem per sample and write credibility.csv.
    Credibility,
    /// Coverage / filtered-accuracy curves for softmax and credibility scores.
    FilterCurve,
    /// PGD attack sweep with per-restart accuracy ranges.
    Attack,
    /// Run the built-in verification suite and write verify_report.csv.
    Verify,
    /// Median risk and profile norm across a γ sweep.
    GammaSweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = Some(out);
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: invalid configuration: {e:#}");
        return ExitCode::from(2);
    }

    let run = match cli.command {
        Command::Credibility => cmd_credibility(&cfg),
        Command::FilterCurve => cmd_filter_curve(&cfg),
        Command::Attack => cmd_attack(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::GammaSweep => cmd_gamma_sweep(&cfg),
    };
    match run {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
