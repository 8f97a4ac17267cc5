//! `condrecip`: batch driver for the reciprocity pipeline.
//!
//! Exit status: 0 success, 1 usage error, 2 invalid data, 3 numerical
//! non-convergence (artifacts are still written).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "condrecip", version, about = "Conditional-action reciprocity in partially observed interaction logs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Root of all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reconcile interview CSVs into a canonical event log.
    Ingest(commands::IngestArgs),
    /// Generate a synthetic world and its degraded event log.
    Synth(commands::SynthArgs),
    /// Fit one level of the null hierarchy.
    FitNull(commands::FitNullArgs),
    /// Calibrate the guest-report omission probability.
    Calibrate(commands::CalibrateArgs),
    /// Short-window reciprocity statistic with its null p-value.
    Reciprocity(commands::ReciprocityArgs),
    /// Fit mixed logistic models and write a regression table.
    Glmm(commands::GlmmArgs),
    /// Class-average reciprocity curves with null bands.
    Envelope(commands::EnvelopeArgs),
    /// Everything above for one log, bundled into a directory.
    Report(commands::ReportArgs),
}

pub(crate) fn out_dir(path: &std::path::Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli.command, &cli.global) {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged) => {
            eprintln!("warning: some fits did not converge; outputs are flagged");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
