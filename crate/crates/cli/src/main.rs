//! `spotvol`: simulate diffusions, filter spot volatility, run the local
//! linear baseline and the simulation studies.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "spotvol", version, about = "Semiparametric spot-volatility estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Random seed; overrides sim.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file, or output directory for curves and tables.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Worker threads for the Monte Carlo studies [default: all cores].
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Configuration override, repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct WithInput {
    /// Observed path as `t,x` CSV.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path and write it as `t,x` CSV.
    Simulate(Common),
    /// Estimate drift and curvature, then filter the spot volatility of a path.
    Filter(WithInput),
    /// Local linear kernel estimate of the spot volatility at every observation.
    LocalLinear(WithInput),
    /// Volatility curves of the mean-reverting models at several sampling steps.
    Curves(Common),
    /// Out-of-sample RMSE of both estimators over many paths.
    Table1(Common),
    /// Realized minus integrated volatility of both estimators over many paths.
    Table2(Common),
}

fn load_config(common: &Common) -> Result<config::RunConfig, Failure> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = config::load(&text, &common.set)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = Some(seed);
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(c) => commands::simulate(&load_config(&c)?, &c.out),
        Command::Filter(w) => commands::filter(&load_config(&w.common)?, &w.input, &w.common.out),
        Command::LocalLinear(w) => commands::local_linear(&load_config(&w.common)?, &w.input, &w.common.out),
        Command::Curves(c) => commands::curves(&load_config(&c)?, &c.out, workers(&c)),
        Command::Table1(c) => commands::table1(&load_config(&c)?, &c.out, workers(&c)),
        Command::Table2(c) => commands::table2(&load_config(&c)?, &c.out, workers(&c)),
    }
}

fn workers(c: &Common) -> Option<usize> {
    c.workers.map(|n| n as usize)
}

fn main() -> ExitCode {
    let keys = config::keys_help();
    let mut cmd = Cli::command().after_long_help(keys.clone());
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        let k = keys.clone();
        cmd = cmd.mut_subcommand(name, |s| s.after_help(k));
    }
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
