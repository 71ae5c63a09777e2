//! `bnn`: dataset generation, training, evaluation, Cayley-table
//! extraction, representation-inversion attacks and spectra dumps for
//! bispectral networks over finite commutative groups.
//!
//! Every subcommand reads parameters from flags, then a `key = value`
//! config file (`--config`), then built-in defaults, and writes the
//! resolved configuration next to whatever files it produces, so any
//! finished run can be repeated from its config echo alone.
//!
//! Exit codes: 0 success, 1 usage or data error, 2 soft failure (no
//! training plateau, or an extracted table that is not isomorphic).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod io;
mod run;

use config::ConfigMap;

#[derive(Parser)]
#[command(
    name = "bnn",
    version,
    about = "Bispectral networks over finite commutative groups",
    propagate_version = true
)]
struct Cli {
    /// Plain-text `key = value` config file; explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (env BNN_THREADS as fallback; all cores when unset).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled orbit dataset.
    GenData(run::GenDataArgs),
    /// Train the bispectral layer on an orbit dataset.
    Train(run::TrainArgs),
    /// Measure output invariance and row equivariance of weights.
    Eval(run::EvalArgs),
    /// Read the composition table off weights and test isomorphism.
    ExtractCayley(run::ExtractCayleyArgs),
    /// Search for signals whose representation matches a target's.
    Attack(run::AttackArgs),
    /// Dump the transform, power spectrum and bispectrum of a signal.
    Spectra(run::SpectraArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout and exit 0; real usage
            // errors keep the documented exit code 1, not clap's 2.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("BNN_THREADS").ok() {
            Some(s) => {
                Some(s.parse::<usize>().context("BNN_THREADS must be a positive integer")?)
            }
            None => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool setup failed")?;
    }

    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::empty(),
    };
    match cli.command {
        Command::GenData(args) => run::gen_data(args, &cfg),
        Command::Train(args) => run::run_train(args, &cfg),
        Command::Eval(args) => run::run_eval(args, &cfg),
        Command::ExtractCayley(args) => run::run_extract_cayley(args, &cfg),
        Command::Attack(args) => run::run_attack(args, &cfg),
        Command::Spectra(args) => run::run_spectra(args, &cfg),
    }
}
