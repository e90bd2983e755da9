//! Command-line front end: dataset generation, centralized and federated
//! training with run manifests, partition skew reports and communication tables.
//!
//! Metrics CSV (schema 1): `round,client_id,loss,accuracy,bytes_cum,epoch_seconds`.
//! Federated runs write one row per participant (last local epoch loss and
//! train accuracy) and a `global` row (pooled client test loss and accuracy).
//! Centralized runs write a client `0` row (train loss and accuracy) and a
//! `global` row (test accuracy) per epoch. `epoch_seconds` is wall-clock time
//! and the only column that differs between reruns.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use args::{Cli, Command};
pub use config::{DataSource, Mode, ModelSettings, RunConfig};
pub use error::{CliError, CliResult};

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::TrainCentralized(a) => {
            commands::train(&RunConfig::from_args(Mode::Centralized, &a)?, &a.out)
        }
        Command::TrainFederated(a) => {
            commands::train(&RunConfig::from_args(Mode::Federated, &a)?, &a.out)
        }
        Command::PartitionReport(a) => commands::partition_report(&a),
        Command::CommReport(a) => commands::comm_report(&a),
        Command::Rerun(a) => commands::rerun(&a),
    }
}
