use std::path::PathBuf;
use std::process::ExitCode;

use bohrlab::experiment::{exit_code, list_systems, run, ExperimentConfig};
use bohrlab::Error;
use clap::{Parser, Subcommand};

/// Finite-resolution experiments on semigroup actions.
#[derive(Parser)]
#[command(name = "bohrlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `out` in the config; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Changes speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// List built-in semigroups, spaces, actions, Følner kinds and test families.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are config errors; --help and --version are not.
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::List => {
            print!("{}", list_systems());
            ExitCode::SUCCESS
        }
        Command::Run { config } => match run_config(&config, cli.out, cli.seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                if let Error::NonConvergence { residual_history, .. } = &e {
                    let tail: Vec<String> = residual_history.iter().rev().take(5).rev().map(|r| format!("{r:e}")).collect();
                    eprintln!("last residuals: {}", tail.join(", "));
                }
                ExitCode::from(exit_code(&e) as u8)
            }
        },
    }
}

fn run_config(path: &PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(&cfg, &dir)?;
    println!(
        "{}: {} artifacts in {} ({:.2} s)",
        outcome.report.experiment,
        outcome.report.artifacts.len() + 1,
        dir.display(),
        outcome.seconds
    );
    Ok(())
}
