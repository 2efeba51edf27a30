use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fejerlab::exact::oracle_report;
use fejerlab::experiments::{self, ExperimentError};

#[derive(Parser)]
#[command(
    name = "fejerlab",
    version,
    about = "Fejér monotone iteration experiments and exact oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write trace.csv, directions.csv, summary.json.
    Run {
        config: PathBuf,
        /// Output directory; overrides FEJERLAB_OUT and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the exact identities and print a table.
    Oracle {
        #[arg(long, default_value_t = 200)]
        max_n: u64,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Consolidate summaries into a pass/fail table.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Also write the consolidated report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })
}

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => experiments::run_path(&config, out.as_deref()).map(|(summary, dir)| {
            println!(
                "{}",
                experiments::Report::from_summaries(std::slice::from_ref(&summary))
                    .table()
                    .trim_end()
            );
            println!("artifacts: {}", dir.display());
            status(summary.pass)
        }),
        Command::Oracle { max_n, json } => {
            let report = oracle_report(max_n);
            println!("{report}");
            match json {
                Some(path) => write_json(&path, &report).map(|_| status(report.pass)),
                None => Ok(status(report.pass)),
            }
        }
        Command::Report { summaries, json } => experiments::report(&summaries).and_then(|report| {
            print!("{}", report.table());
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            Ok(status(report.pass))
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
