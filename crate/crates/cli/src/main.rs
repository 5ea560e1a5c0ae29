//! `symbreak` command-line interface.

mod commands;
mod config;
mod datasets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use symbreak::Error;

use crate::config::CommonFlags;

const GROUP_HELP: &str = "Group forms: c<R> (planar rotations of order R), so3, shift[:z=Z], \
perm:first=M[,dim=D], sym:n=N, trivial[:dim=D].";
const DATA_HELP: &str = "Data forms: clouds[:aniso=A,points=M], orbit[:r=R,theta=one_hot|uniform|w1;w2;..], \
swiss[:p=P], or a dataset CSV written by `synth` (file:PATH or PATH.csv).";

#[derive(Debug, Parser)]
#[command(name = "symbreak", version, about = "Measure distributional symmetry breaking and invariant ridge risk")]
#[command(after_help = "Exit codes: 0 success, 2 configuration error, 3 numerical failure.\n\
Settings resolve as flags > --config file > defaults; every run writes config.resolved.json to the output directory.")]
struct Cli {
    /// JSON file with a flat object of settings for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "SYMBREAK_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel rounds and trials.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classifier detection metric: original vs randomly transformed samples.
    #[command(after_help = format!("{DATA_HELP}\n{GROUP_HELP}"))]
    Detect(commands::detect::DetectArgs),
    /// Task-dependent metrics and augmentation accuracies over a swiss-roll sweep.
    Taskdep(commands::taskdep::TaskdepArgs),
    /// Monte Carlo p-value for symmetry breaking.
    #[command(after_help = format!("{DATA_HELP}\n{GROUP_HELP}"))]
    Pvalue(commands::pvalue::PvalueArgs),
    /// MMD between two datasets, or between a dataset and its transformed copy.
    #[command(after_help = format!("{DATA_HELP}\n{GROUP_HELP}"))]
    Mmd(commands::mmd::MmdArgs),
    /// Monte Carlo ridge risks over a sigma_w sweep of the minimal model.
    RidgeSim(commands::ridge::RidgeSimArgs),
    /// Deterministic-equivalent risks and strong-correlation limits, no sampling.
    RidgeTheory(commands::ridge::RidgeTheoryArgs),
    /// Generate a synthetic dataset file.
    #[command(after_help = DATA_HELP)]
    Synth(commands::synth::SynthArgs),
}

fn run(cli: Cli) -> symbreak::Result<()> {
    let file = cli.config.as_deref().map(config::read_config_file).transpose()?;
    let common = CommonFlags { seed: cli.seed, out: cli.out, workers: cli.workers };
    match &cli.command {
        Command::Detect(a) => commands::detect::run(file, a, &common),
        Command::Taskdep(a) => commands::taskdep::run(file, a, &common),
        Command::Pvalue(a) => commands::pvalue::run(file, a, &common),
        Command::Mmd(a) => commands::mmd::run(file, a, &common),
        Command::RidgeSim(a) => commands::ridge::run_sim(file, a, &common),
        Command::RidgeTheory(a) => commands::ridge::run_theory(file, a, &common),
        Command::Synth(a) => commands::synth::run(file, a, &common),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Detect(_) => "detect",
        Command::Taskdep(_) => "taskdep",
        Command::Pvalue(_) => "pvalue",
        Command::Mmd(_) => "mmd",
        Command::RidgeSim(_) => "ridge-sim",
        Command::RidgeTheory(_) => "ridge-theory",
        Command::Synth(_) => "synth",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = subcommand_name(&cli.command);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                return ExitCode::from(3);
            }
            if matches!(e, Error::Config(_) | Error::Parse(_)) {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                    eprintln!("For more information, try 'symbreak {name} --help'.");
                }
            }
            ExitCode::from(2)
        }
    }
}
