use std::process::ExitCode;

use clap::Parser;
use retrovote::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; anything else is a
            // bad invocation and shares the invalid-config exit code.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    retrovote::run(cli)
}
