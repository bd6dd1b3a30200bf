mod estimate;
mod json;
mod simulate;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cace_core::{
    run_study_with, CaceError, CovariateSelection, ExperimentData, IntervalMethod, SimConfig,
};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_INVALID: u8 = 2;
const EXIT_RANK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cace",
    version,
    about = "Sample complier average causal effect estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Point estimates and confidence sets for a CSV with columns z, w, y and covariates.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated subset of wald-ld, wald-delta, reg-ehw, reg-hc2, reg-hc3.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<IntervalMethod>>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// `auto` (every other numeric column), `none`, or a comma-separated list.
        #[arg(long, default_value = "auto")]
        covariates: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Monte Carlo study on a fixed simulated population.
    Simulate {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        pco: f64,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write per-replicate estimates, lengths and flags to this CSV.
        #[arg(long)]
        dump_replicates: Option<PathBuf>,
    },
}

enum Failure {
    Core(CaceError),
    Other(String),
}

impl From<CaceError> for Failure {
    fn from(e: CaceError) -> Self {
        Failure::Core(e)
    }
}

fn covariate_selection(spec: &str) -> CovariateSelection {
    match spec.trim() {
        "auto" => CovariateSelection::All,
        "none" => CovariateSelection::None,
        list => CovariateSelection::Named(
            list.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        ),
    }
}

/// Writes to stdout; a closed pipe ends output quietly.
fn write_out(s: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    match out.write_all(s.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Other(e.to_string())),
        _ => Ok(()),
    }
}

fn emit<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let s = json::to_string(value, true).map_err(|e| Failure::Other(e.to_string()))?;
    write_out(&(s + "\n"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate {
            input,
            methods,
            alpha,
            covariates,
            format,
        } => {
            let data = ExperimentData::load_csv(&input, &covariate_selection(&covariates))?;
            let methods = methods.unwrap_or_else(|| estimate::default_methods(data.k()));
            let reports = estimate::run(&data, &methods, alpha)?;
            match format {
                Format::Json => emit(&reports)?,
                Format::Text => write_out(&estimate::render_text(&data, &reports))?,
            }
        }
        Command::Simulate {
            n,
            pco,
            rho,
            k,
            reps,
            seed,
            alpha,
            format,
            dump_replicates,
        } => {
            let cfg = SimConfig {
                n,
                p_co: pco,
                rho,
                k,
                reps,
                seed,
                alpha,
            };
            let out = run_study_with(&cfg, None)?;
            if let Some(path) = dump_replicates {
                simulate::dump_replicates(&out, &path)
                    .map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
            }
            match format {
                Format::Json => emit(&out.summary)?,
                Format::Text => write_out(&simulate::render_text(&out.summary))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_rank_failure() {
                EXIT_RANK
            } else {
                EXIT_INVALID
            })
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
