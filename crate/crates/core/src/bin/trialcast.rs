use clap::Parser;
use trialcast::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
