use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rehearsal::sweep::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "rehearsal",
    version,
    about = "Memory-budgeted rehearsal experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first codec and budget of a config once, with the base seed.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every codec × budget × seed of a config and write results.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild summary.csv and plots from a results.csv.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the directory of the input.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> rehearsal::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.protocol.runs = 1;
            cfg.protocol.codecs.truncate(1);
            cfg.protocol.budgets.truncate(1);
            let out = sweep::run_sweep(&cfg)?;
            for c in &out.curves {
                println!(
                    "task {} accuracy {:.4} epochs {}",
                    c.task_index, c.accuracy, c.epochs
                );
            }
            let r = &out.results[0];
            if !r.is_ok() {
                eprintln!("run failed: {}", r.error);
                return Err(rehearsal::Error::Config(r.error.clone()));
            }
            println!(
                "{} @ {} B seed {}: final accuracy {:.4}, {} instances, total {} B",
                r.codec,
                r.budget_bytes,
                r.seed,
                r.final_accuracy,
                r.buffer_instances,
                r.total_bytes
            );
            println!("wrote {}", cfg.output.dir.display());
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = sweep::run_sweep(&cfg)?;
            for s in &out.summary {
                println!(
                    "{:<16} {:>10} B  {:.4} ± {:.4}  ({} runs, {} failed)",
                    s.codec,
                    s.budget_bytes,
                    s.mean_final_accuracy,
                    s.std_final_accuracy,
                    s.runs,
                    s.failed
                );
            }
            println!("wrote {}", cfg.output.dir.display());
        }
        Command::Report { input, output } => {
            for s in sweep::report(&input, output.as_deref())? {
                println!(
                    "{:<16} {:>10} B  {:.4} ± {:.4}  ({} runs)",
                    s.codec, s.budget_bytes, s.mean_final_accuracy, s.std_final_accuracy, s.runs
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
