use clap::Parser;
use fretsim::cli::{run, Cli};
use std::io::Write;

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
        Err(e) => {
            eprintln!("fretsim: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
