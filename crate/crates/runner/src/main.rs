use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fkdrift_core::kato::BUILTIN_DRIFTS;
use fkdrift_runner::{parse_scenario, run, RunnerError, ALL_CHECKS};

/// Numerical audits for Brownian motion with singular forward-Kato drift.
#[derive(Parser)]
#[command(name = "fkdrift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of a scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory for results.jsonl and summary.csv.
        #[arg(long, env = "FKDRIFT_OUT", default_value = "fkdrift-out")]
        out: PathBuf,
        /// Override the scenario's simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List builtin drifts and their parameters.
    ListDrifts,
    /// List check identifiers.
    ListChecks,
}

fn fail(e: RunnerError) -> ExitCode {
    eprintln!("fkdrift: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListDrifts => {
            for (name, desc) in BUILTIN_DRIFTS {
                println!("{name:<20} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::ListChecks => {
            for (id, desc) in ALL_CHECKS {
                println!("{id:<28} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            scenario,
            out,
            seed,
            threads,
        } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(source) => return fail(RunnerError::Io { path: scenario, source }),
            };
            let mut sc = match parse_scenario(&text) {
                Ok(sc) => sc,
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                sc.simulation.seed = s;
            }
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("fkdrift: cannot set thread count: {e}");
                    return ExitCode::from(1);
                }
            }
            let report = run(&sc, &out, |r| {
                println!("{:<28} {:<12} {:>9.2}s  {}", r.check, r.status.as_str(), r.wall_time_s, r.message);
            });
            match report {
                Ok(r) => {
                    println!("results in {}", r.out_dir.display());
                    ExitCode::from(r.exit_code as u8)
                }
                Err(e) => fail(e),
            }
        }
    }
}
