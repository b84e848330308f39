use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use iurlse_cli::{cmd_list_benchmarks, cmd_oracle, cmd_report, cmd_run, Overrides};
use iurlse_core::Method;

#[derive(Parser)]
#[command(name = "iurlse", version, about = "Reliability level-set estimation under input uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    /// proposed | straddle | mile | random
    #[arg(long)]
    method: Option<Method>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replications: self.replications,
            method: self.method,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and replication; writes results.csv and summary.json.
    Run(Common),
    /// Monte-Carlo truth table for the configured benchmark and input law.
    Oracle(Common),
    /// Mean and standard error per method, iteration and metric.
    Report {
        /// results.csv files or directories containing one
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    ListBenchmarks,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("IURLSE_THREADS") {
        let n: usize = v.trim().parse().context("IURLSE_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| match cli.command {
        Command::Run(c) => cmd_run(&c.config, &c.overrides()).map(|o| {
            println!("wrote {} and {}", o.results.display(), o.summary.display());
            if o.failures > 0 {
                eprintln!("{} replication(s) failed; see summary", o.failures);
            }
        }),
        Command::Oracle(c) => cmd_oracle(&c.config, &c.overrides()).map(|p| println!("wrote {}", p.display())),
        Command::Report { inputs, out } => cmd_report(&inputs, out.as_deref()).map(|p| println!("wrote {}", p.display())),
        Command::ListBenchmarks => {
            print!("{}", cmd_list_benchmarks());
            Ok(())
        }
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
