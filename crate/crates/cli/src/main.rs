use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use juryopt_cli::{parse_threads, preset, CliError, Command, ExperimentConfig, Result, THREADS_ENV};

/// Majority-vote experiments for representative democracy.
#[derive(Debug, Parser)]
#[command(name = "juryopt", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment (tradeoff, house, optk, polynomial, audit,
    /// example4, example6, independent2).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => preset(cli.command.default_preset())?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Some(n) = parse_threads(&v)? {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    let cfg = load(cli)?;
    let rs = cli.command.run(&cfg)?;
    let dir = rs.write(&cli.out)?;
    println!("{}", serde_json::to_string_pretty(&rs.summary_json())?);
    eprintln!("wrote {}", dir.display());
    Ok(rs.asserted_failures == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit: asserted checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
