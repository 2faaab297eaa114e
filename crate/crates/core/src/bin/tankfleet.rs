use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tankfleet::harness::config::read_config;
use tankfleet::harness::{parse_strategies, run_experiment, write_plot_data, write_report, ExperimentConfig};

#[derive(Parser)]
#[command(name = "tankfleet", version, about = "Hot-water fleet reheat experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write summary.csv and daily.csv.
    Run {
        /// Config file (`key = value` lines); defaults are used without one.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Strategy name, comma-separated list, or `all`.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        households: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write transitions_<hid>.csv for every household.
        #[arg(long)]
        transitions: bool,
    },
    /// Write fig1a/fig1b/fig3a/fig3b tables from a run's daily.csv.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> tankfleet::Result<()> {
    match cli.command {
        Command::Run {
            config,
            strategy,
            seed,
            days,
            households,
            out,
            transitions,
        } => {
            let mut cfg = ExperimentConfig::default();
            if let Some(path) = &config {
                cfg.apply_str(&read_config(path)?)?;
            }
            if let Some(s) = strategy {
                cfg.strategies = parse_strategies(&s)?;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(d) = days {
                cfg.n_days = d;
            }
            if let Some(h) = households {
                cfg.n_households = h;
            }
            cfg.keep_transitions |= transitions;
            let report = run_experiment(&cfg)?;
            for path in write_report(&report, &out)? {
                println!("{}", path.display());
            }
        }
        Command::PlotData { input } => {
            for path in write_plot_data(&input)? {
                println!("{}", path.display());
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
