use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mobcoin::config::load_config;
use mobcoin::replay::replay_file;
use mobcoin::run::run_to_dir;

/// Exit codes: 0 ok, 1 schema error, 2 runtime error, 3 replay integrity
/// failure, 4 dangling reference, 5 invariant violation in the scenario.
#[derive(Parser)]
#[command(name = "mobcoin", version, about = "Tradeable mobility credit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// overrides the seed in the scenario file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a scenario file without running it
    Validate { config: PathBuf },
    /// Rebuild balances from an event file and verify it
    Replay { events: PathBuf },
    /// Print the summary of a run directory
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(s) => {
                println!("ok: {} modes, {} agents, {} days", s.modes.len(), s.population(), s.days());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Run { config, out, seed } => match load_config(&config) {
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
            Ok(mut s) => {
                if let Some(seed) = seed {
                    s.config.seed = seed;
                }
                match run_to_dir(s, &out) {
                    Ok(r) => {
                        println!("ok: {} days, {} events -> {}", r.summary.days_simulated, r.summary.events, out.display());
                        0
                    }
                    Err((e, _)) => {
                        eprintln!("error: {e}");
                        2
                    }
                }
            }
        },
        Command::Replay { events } => match replay_file(&events) {
            Ok(r) => {
                for (acc, b) in r.balances.iter().filter(|(_, b)| !b.is_zero()) {
                    println!("{acc}\t{b}");
                }
                let checked = if r.summary_checked { ", summary matches" } else { "" };
                eprintln!("ok: {} events, balances sum to zero{checked}", r.events);
                0
            }
            Err(e) => {
                eprintln!("integrity failure: {e}");
                e.exit_code()
            }
        },
        Command::Report { dir } => match mobcoin::report::render(&dir) {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
