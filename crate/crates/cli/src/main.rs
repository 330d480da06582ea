use std::process::ExitCode;

use clap::Parser;
use wfh_cli::{execute, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.to_string()).to_json());
            return ExitCode::from(2);
        }
    };
    let mut stdout = std::io::stdout();
    match execute(&cli, &mut stdout) {
        Ok(outcome) => {
            for (name, deficit) in &outcome.deficits {
                log::info!("{name}: pre-normalization deficit {deficit:e}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
