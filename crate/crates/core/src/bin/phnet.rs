use std::process::ExitCode;

use clap::Parser;
use phnet::cli::{run, Cli};

fn main() -> ExitCode {
    let command: Vec<String> = std::env::args().skip(1).collect();
    run(Cli::parse(), &command)
}
