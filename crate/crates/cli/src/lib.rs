//! Command implementations behind the `crs-bias` binary.

pub mod commands;
pub mod config;

pub use commands::{cmd_augment, cmd_evaluate, cmd_generate, cmd_report, cmd_stats, CommandOutput};
pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] crsbias::Error),
}

impl CliError {
    /// 2 for config or input problems, 3 for backend failures, 4 for broken
    /// internal invariants.
    pub fn exit_code(&self) -> i32 {
        use crsbias::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Backend(_) | E::NoDialoguesAccepted(_)) => 3,
            CliError::Core(E::PlanInvariant(_) | E::UnknownPlanDialogue(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}
