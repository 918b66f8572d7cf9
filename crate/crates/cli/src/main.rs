use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stdd::app::{self, Options};

#[derive(Parser)]
#[command(name = "stdd", version, about = "Space-time domain decomposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum worker threads for additive subdomain solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheme and write the trace.
    Run { config: PathBuf },
    /// Run the property checks.
    Verify { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        seed: cli.seed,
        threads: cli.threads,
    };
    let mut out = std::io::stdout();
    let result = match &cli.command {
        Command::Run { config } => app::load(config, &opts).and_then(|c| app::run(&c, &opts, &mut out).map(drop)),
        Command::Verify { config } => app::load(config, &opts).and_then(|c| app::verify(&c, &mut out).map(drop)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stdd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
