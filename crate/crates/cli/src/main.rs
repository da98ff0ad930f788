use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use wfalearn_cli::{
    run_eval, run_generate, run_sweep, run_train, CliError, ExperimentConfig, Overrides,
};
use wfalearn_core::Variant;

#[derive(Parser)]
#[command(
    name = "wfalearn",
    version,
    about = "Learn weighted automata, linear or with neural maps, from string samples"
)]
struct Cli {
    /// Experiment configuration file (JSON); flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master random seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Model variant: sp, fac.non, tran.non, or both.non
    #[arg(long, global = true)]
    variant: Option<String>,

    /// Number of model states
    #[arg(long, global = true)]
    rank: Option<usize>,

    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweeps; 0 uses every core
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample train/validation/test splits plus the test oracle file
    Generate,
    /// Learn a model from the training data and save it with its loss history
    Train,
    /// Score a saved model on a test set
    Eval {
        /// Saved model file
        model: PathBuf,
        /// Test set in SPICE format
        test: PathBuf,
        /// Oracle probabilities, one per test line; omitted, the test
        /// set's own frequencies stand in
        oracle: Option<PathBuf>,
    },
    /// Run every (variant, rank, sample size, seed) grid cell into sweep.csv
    Sweep,
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("rendering summary: {e}")))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let variant = cli
        .variant
        .as_deref()
        .map(|s| {
            s.parse::<Variant>()
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .transpose()?;
    let overrides = Overrides {
        seed: cli.seed,
        variant,
        rank: cli.rank,
        jobs: cli.jobs,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Generate => print_json(&run_generate(&cfg, &cli.out)?),
        Command::Train => print_json(&run_train(&cfg, &cli.out)?),
        Command::Eval {
            model,
            test,
            oracle,
        } => print_json(&run_eval(&model, &test, oracle.as_deref(), &cli.out)?),
        Command::Sweep => print_json(&run_sweep(&cfg, &cli.out)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
