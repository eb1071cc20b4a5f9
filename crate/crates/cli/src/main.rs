use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ionrot_cli::run::warnings;
use ionrot_cli::{load, run, ConfigError, Overrides, RunError};

/// Design and verify rotation protocols for a two-ion chain.
#[derive(Parser, Debug)]
#[command(name = "ionrot", version)]
struct Cli {
    /// Run configuration (flat `key = value` file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSVs, summary and manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's optimiser seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for `sweep`; defaults to the logical CPU count.
    #[arg(long)]
    workers: Option<usize>,
    /// Validate the config and print diagnostics without running.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ionrot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&cli.config).map_err(ConfigError::Io)?;
    let (config, diags) = load(&text, &Overrides { seed: cli.seed })?;
    for d in warnings(&diags) {
        eprintln!("{d}");
    }
    if cli.dry_run {
        println!("config ok: {} ({} warnings)", config.command, warnings(&diags).count());
        return Ok(());
    }
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    run(&text, &config, &diags, &cli.out, workers)?;
    println!("wrote {}", cli.out.display());
    Ok(())
}
