use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crsbias::augment::Strategy;
use crsbias_cli::{cmd_augment, cmd_evaluate, cmd_generate, cmd_report, cmd_stats, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "crs-bias", version, about = "Bias measurement and augmentation for conversational recommendation data")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset statistics: split sizes, item coverage, popular-item ratio.
    Stats(Common),
    /// Build a synthetic single-item dialogue pool.
    Generate(Common),
    /// Plan and materialise an augmentation of the training split.
    Augment(Common),
    /// Score ranked-list runs for popularity bias and accuracy.
    Evaluate(Common),
    /// Re-render the comparison table from a previous evaluation.
    Report(Common),
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration; relative paths resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `augment.k`.
    #[arg(long)]
    k: Option<usize>,
    /// Overrides `augment.strategy` (pop_nudge or once_aug).
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: crsbias::Error| e.to_string())
}

type Cmd = fn(&RunConfig) -> Result<crsbias_cli::CommandOutput, CliError>;

fn run(command: Command) -> Result<String, CliError> {
    let (common, cmd): (Common, Cmd) = match command {
        Command::Stats(c) => (c, cmd_stats),
        Command::Generate(c) => (c, cmd_generate),
        Command::Augment(c) => (c, cmd_augment),
        Command::Evaluate(c) => (c, cmd_evaluate),
        Command::Report(c) => (c, cmd_report),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(Overrides {
        seed: common.seed,
        k: common.k,
        strategy: common.strategy,
    });
    Ok(cmd(&cfg)?.summary)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args.command) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
