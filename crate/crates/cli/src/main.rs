mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(a) => commands::cmd_calibrate(a),
        Command::Price(a) => commands::cmd_price(a),
        Command::Stress(a) => commands::cmd_stress(a),
        Command::Hedge(a) => commands::cmd_hedge(a),
        Command::MomentMatch(a) => commands::cmd_moment_match(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
