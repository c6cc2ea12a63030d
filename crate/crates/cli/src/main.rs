//! `ldpopt` command-line front end.

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ldpopt_cli::run_from_args(std::env::args().collect()))
}
