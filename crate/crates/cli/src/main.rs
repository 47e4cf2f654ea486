mod args;
mod commands;
mod error;
mod render;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors; help and version are not errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Pair(a) => commands::pair(a),
        Command::Suite(a) => commands::suite(a),
        Command::Overlap(a) => commands::overlap_cmd(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Demo(a) => commands::demo(a),
        Command::Guide(a) => commands::guide(a),
        Command::DumpProgram(a) => commands::dump_program(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
