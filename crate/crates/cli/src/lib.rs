//! Library half of the `cascade` command: run configuration, the four
//! subcommands and the mapping from failures to exit codes.

mod commands;
mod config;
mod exit;

pub use commands::{
    cmd_compare, cmd_eval, cmd_synth, cmd_train, evaluate, report_json, train_run, TrainArtifacts,
};
pub use config::{acceptance_preset, DatasetSource, Overrides, RunConfig};
pub use exit::{exit_code, UsageError};
