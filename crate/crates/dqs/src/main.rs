use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dqs::commands;
use dqs::config::{self, ScenarioFile};
use dqs::output::fmt_float;

#[derive(Parser)]
#[command(version, about = "Distributed quantum sensing: thresholds, advantage curves and network simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity thresholds for GHZ probes and Bell pairs.
    Thresholds {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        d_min: usize,
        #[arg(long, default_value_t = 10)]
        d_max: usize,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
    /// Advantage factor against the number of sensors per node.
    Analyze {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// Largest number of sensors per node.
        #[arg(long, default_value_t = 100_000)]
        n_limit: usize,
    },
    /// Simulate a network scenario.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Number of leading trials whose event log is written.
        #[arg(long, default_value_t = 10)]
        log_trials: u64,
    },
    /// Simulate a scenario for each value of one parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Dotted scenario key, e.g. `memory.efficiency`.
        #[arg(long)]
        param: String,
        /// Comma-separated TOML values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ScenarioArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    preset: Option<u8>,
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> dqs::Result<ScenarioFile> {
        match (&self.config, self.preset) {
            (Some(path), _) => ScenarioFile::load(path),
            (None, Some(index)) => config::preset(index),
            (None, None) => unreachable!("clap requires one of --preset and --config"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_else(|| "undefined".into())
}

fn run(cli: Cli) -> dqs::Result<()> {
    match cli.command {
        Command::Thresholds { out, d_min, d_max, n_min, n_max } => {
            for f in commands::thresholds(&out, d_min..=d_max, n_min..=n_max)? {
                println!("{}", f.display());
            }
        }
        Command::Analyze { out, d, n_limit } => {
            for f in commands::analyze(&out, d, n_limit)? {
                println!("{}", f.display());
            }
        }
        Command::Simulate { scenario, run, log_trials } => {
            let s = scenario.load()?.to_scenario()?;
            let (r, files) = commands::simulate(&run.out, &s, run.trials, run.seed, log_trials)?;
            println!(
                "{}: p={} F={} eta={} eta_tilde={}",
                r.scenario,
                fmt_float(r.success_prob),
                opt(r.fidelity),
                opt(r.eta),
                opt(r.eta_tilde)
            );
            if r.successes == 0 {
                eprintln!("warning: no trial produced a probe; eta is undefined");
            }
            println!("wrote {} files to {}", files.len(), run.out.display());
        }
        Command::Sweep { scenario, run, param, values } => {
            let base = scenario.load()?;
            let (results, files) = commands::sweep(&run.out, &base, &param, &values, run.trials, run.seed)?;
            for (value, r) in values.iter().zip(&results) {
                println!("{param}={value}: p={} F={} eta={}", fmt_float(r.success_prob), opt(r.fidelity), opt(r.eta));
            }
            for f in files {
                println!("{}", f.display());
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
