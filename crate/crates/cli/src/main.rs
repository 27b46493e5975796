//! `gdp`: generate datasets, train relational-inference models, run the
//! analysis experiments and re-score stored outputs.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "gdp", version, about = "Relational inference for graph dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Options {
    /// Flat `key = value` file; `--key value` flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,

    /// `--key value` settings, e.g. `--system diffusion --graph er:20:0.1`
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    settings: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate trajectories on a random graph and write a dataset directory
    Generate(Options),
    /// Train GDP (or a baseline) on a dataset; writes checkpoints and scores
    Train(Options),
    /// Run an analysis or benchmark experiment and write its report
    Experiment {
        /// fig2, fig3, roots, compare, escape, distortion, ksweep, ablation, ws or stacking
        tag: String,
        #[command(flatten)]
        options: Options,
    },
    /// Recompute the AUC of a score CSV against an edge list
    Eval(Options),
}

fn resolve(options: Options) -> CliResult<RunConfig> {
    let mut settings = options.settings;
    let mut file = options.config;
    // `--config` may also appear among the trailing settings
    if let Some(i) = settings.iter().position(|a| a == "--config") {
        let Some(path) = settings.get(i + 1).cloned() else {
            return error::usage("--config needs a path");
        };
        file = Some(PathBuf::from(path));
        settings.drain(i..=i + 1);
    }
    let mut cfg = match file {
        Some(p) => RunConfig::from_file(&p)?,
        None => RunConfig::default(),
    };
    cfg.apply_flags(&settings)?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(o) => commands::generate(resolve(o)?),
        Command::Train(o) => commands::train_cmd(resolve(o)?),
        Command::Experiment { tag, options } => commands::experiment(&tag, resolve(options)?),
        Command::Eval(o) => commands::eval(resolve(o)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
