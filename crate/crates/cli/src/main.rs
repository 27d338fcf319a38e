use clap::Parser;

use dispersive_eo_cli::args::Cli;
use dispersive_eo_cli::commands::execute;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = execute(&cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
