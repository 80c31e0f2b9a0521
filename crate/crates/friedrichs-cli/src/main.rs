use clap::Parser;
use friedrichs_cli::{runs, Cli};

fn main() {
    let cli = Cli::parse();
    match runs::execute(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
