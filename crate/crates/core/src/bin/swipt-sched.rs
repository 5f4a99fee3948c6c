use clap::Parser;

use swipt_sched::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
