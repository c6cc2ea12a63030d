//! Library half of the `ldpopt` command-line tool: argument parsing, config
//! files and the command implementations. The binary is a thin wrapper around
//! [`run_from_args`].

mod args;
mod commands;
mod config;

pub use commands::{load_mechanism, CliError};

use args::{Cli, Command};
use clap::Parser;
use std::io::Write;

fn run(cli: &Cli) -> Result<(), CliError> {
    let (threads, out) = match &cli.command {
        Command::Mech(a) => (a.common.threads, &a.common.out),
        Command::RiskTable(a) => (a.common.threads, &a.common.out),
        Command::LowerBound(a) => (a.common.threads, &a.common.out),
        Command::Simulate(a) => (a.common.threads, &a.common.out),
        Command::BayesDemo(a) => (a.common.threads, &a.common.out),
    };
    let exec = || match &cli.command {
        Command::Mech(a) => commands::cmd_mech(a),
        Command::RiskTable(a) => commands::cmd_risk_table(a),
        Command::LowerBound(a) => commands::cmd_lower_bound(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::BayesDemo(a) => commands::cmd_bayes_demo(a),
    };
    let text = match threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?
            .install(exec)?,
        None => exec()?,
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}"))),
    }
}

/// Runs the tool on a full argument vector (program name first) and returns
/// the process exit code. Messages go to stderr.
pub fn run_from_args(argv: Vec<String>) -> u8 {
    let argv = match config::expand_args(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}
