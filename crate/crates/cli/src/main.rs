use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use epicheck::cli::Cli;
use epicheck::{run, Format, Status};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((outcome, format)) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let text = match format {
                Format::Human => outcome.human.as_str(),
                Format::Json => outcome.json.as_str(),
                Format::Csv => outcome.csv.as_deref().unwrap_or_default(),
            };
            let mut out = io::stdout().lock();
            let newline = if text.ends_with('\n') { "" } else { "\n" };
            // A closed pipe downstream is not an error of ours.
            let _ = write!(out, "{text}{newline}").and_then(|_| out.flush());
            outcome.status.into()
        }
        Err(e) => {
            eprintln!("error: {e}");
            Status::Invalid.into()
        }
    }
}
