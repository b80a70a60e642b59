//! Command-line front end: config merging, CSV exchange, reports.

pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::{Cli, Command, RunConfig};
pub use error::{CliError, CliResult, ErrorKind};
pub use run::{run, Summary};

/// Parse, run and report. Returns the process exit status; the summary
/// goes to stdout and any error, as JSON, to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return 0;
        }
        Err(e) => return fail(&CliError::config(e.to_string().trim_end())),
    };
    let result = RunConfig::resolve(cli.command).and_then(|(cfg, dry_run)| {
        if dry_run {
            Ok(serde_json::to_string_pretty(&cfg).expect("config serializes"))
        } else {
            run(&cfg).map(|s| serde_json::to_string_pretty(&s).expect("summary serializes"))
        }
    });
    match result {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> i32 {
    eprintln!("{}", e.report());
    e.kind.exit_code()
}
