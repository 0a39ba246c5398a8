use std::process::ExitCode;

use clap::Parser;
use rgg1d_cli::{execute, RunSpec};

fn main() -> ExitCode {
    let spec = match RunSpec::try_parse() {
        Ok(spec) => spec,
        Err(e) => {
            let _ = e.print();
            // --help and --version come through here too
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&spec) {
        Ok(doc) => {
            for w in &doc.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
