use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use hyperseg_cli::args::Cli;
use hyperseg_cli::commands::{run, wants_json};
use hyperseg_cli::{configure_threads, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let json = wants_json(&cli.command);
    let result = configure_threads().and_then(|()| run(&cli.command));
    match result {
        Ok(outcome) => {
            let text = if json {
                serde_json::to_string_pretty(&outcome.json).expect("JSON values serialize") + "\n"
            } else {
                outcome.lines.iter().map(|l| format!("{l}\n")).collect()
            };
            // a closed pipe downstream is not a failure of the command
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("hyperseg: cannot write to stdout: {e}");
                    ExitCode::from(CliError::INPUT)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("hyperseg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
