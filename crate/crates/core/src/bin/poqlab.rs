use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use poqlab::experiments::{catalog, run_experiment, write_outputs, Config};

#[derive(Parser)]
#[command(name = "poqlab", version, about = "Brute-force quantum query experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its result table.
    Run {
        #[arg(long)]
        experiment: String,
        /// Flat `key = value` overrides; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// CSV output; metadata goes to `<out>.meta`.
        #[arg(long)]
        out: PathBuf,
    },
    /// List the experiments.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::List => {
            for e in catalog() {
                let kind = if e.statistical { "statistical" } else { "exact" };
                println!("{}\t{}\t{kind}\t{}", e.name, e.operation, e.checks);
            }
            ExitCode::SUCCESS
        }
        Command::Run { experiment, config, seed, out } => {
            let result = config
                .as_deref()
                .map_or_else(|| Ok(Config::default()), Config::load)
                .and_then(|cfg| {
                    let table = run_experiment(&experiment, &cfg, seed)?;
                    write_outputs(&table, &cfg, seed, &out)?;
                    Ok(table)
                });
            match result {
                Ok(table) => {
                    eprintln!(
                        "{experiment}: {} rows, {} hard failures, {} statistical outliers",
                        table.rows.len(),
                        table.hard_failures(),
                        table.statistical_failures()
                    );
                    if table.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
