//! `lsgd` command-line interface.
//!
//! Exit codes: 0 on success, 1 on data or runtime errors, 2 on usage errors.

mod args;
mod commands;
mod data;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Bench(a) => commands::bench(a),
        Command::Split(a) => commands::split(a),
        Command::Holdout(a) => commands::holdout(a),
        Command::GenBlobs(a) => commands::gen_blobs(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
