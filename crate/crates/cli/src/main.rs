mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use spiked::error::ErrorKind;

fn threads() -> Result<usize, spiked::Error> {
    match std::env::var("SPIKED_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse::<usize>().map_err(|_| spiked::Error::Syntax {
            what: "SPIKED_THREADS",
            message: format!("{v:?} is not a thread count"),
        }),
    }
}

fn fail(kind: ErrorKind, msg: &str) -> ExitCode {
    let line = msg.lines().next().unwrap_or("").trim();
    eprintln!("error[{}]: {line}", kind.code());
    match kind {
        ErrorKind::Parse | ErrorKind::Domain => ExitCode::from(2),
        ErrorKind::Numeric | ErrorKind::Io => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let msg = text.trim_start_matches("error: ");
            return fail(ErrorKind::Parse, msg);
        }
    };
    let n = match threads() {
        Ok(n) => n,
        Err(e) => return fail(e.kind(), &e.to_string()),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        return fail(ErrorKind::Io, &format!("cannot start worker pool: {e}"));
    }
    match commands::run(cli.command) {
        Ok(json) => {
            // a closed pipe downstream is not our failure
            let _ = writeln!(std::io::stdout().lock(), "{json}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
