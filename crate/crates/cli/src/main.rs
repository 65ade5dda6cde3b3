use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmwi::experiment::{
    cmd_ber, cmd_blockage, cmd_outage, cmd_validate, ExperimentConfig, OutputFile,
};

/// Sweeps of the mmWave spatial-spectral interference model, analytic
/// against Monte Carlo, written as CSV.
#[derive(Debug, Parser)]
#[command(name = "mmwi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte-Carlo seed (overrides `mc_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte-Carlo trials (overrides `mc_trials`).
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blockage probability against the swept parameter.
    Blockage,
    /// Average BER against SNR.
    Ber,
    /// Outage probability against the SINR threshold.
    Outage,
    /// Invariant and cross-validation checks; exit status 0 iff all pass.
    Validate,
}

fn run(cli: Cli) -> mmwi::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| mmwi::Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc_seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.mc_trials = trials;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output));

    let (files, passed): (Vec<OutputFile>, bool) = match cli.command {
        Command::Blockage => (cmd_blockage(&cfg)?, true),
        Command::Ber => (cmd_ber(&cfg)?, true),
        Command::Outage => (cmd_outage(&cfg)?, true),
        Command::Validate => {
            let report = cmd_validate(&cfg)?;
            print!("{}", report.to_text());
            (report.files(), report.passed())
        }
    };
    for f in &files {
        f.write_to(&out)?;
        eprintln!("wrote {}", out.join(&f.name).display());
    }
    Ok(passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("mmwi: {e}");
            ExitCode::from(2)
        }
    }
}
