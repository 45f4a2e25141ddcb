//! `dwrecon`: simulate datasets, train and evaluate reconstruction networks,
//! and render B-mode and attribution figures.
//!
//! Exit codes: 0 success, 1 user error (bad arguments, inputs or configs),
//! 2 internal error. `DWRECON_THREADS` caps the worker threads.
//! Running two commands on the same output directory at once is unsupported.

mod analyze;
mod eval;
mod files;
mod reconstruct;
mod render;
mod simulate;
mod train;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dwrecon_core::model::BuiltinModel;
use dwrecon_core::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "dwrecon", version, about = "Diverging-wave ultrasound reconstruction workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate phantoms and write a dataset with its manifest.
    Simulate(simulate::SimulateArgs),
    /// Train a network on a simulated dataset.
    Train(train::TrainArgs),
    /// Compare a trained network against compounding on a dataset split.
    Eval(eval::EvalArgs),
    /// Reconstruct one sample and render B-mode panels.
    Reconstruct(reconstruct::ReconstructArgs),
    /// Map which inception path drives each output pixel.
    Analyze(analyze::AnalyzeArgs),
}

/// Architecture selection shared by the commands that build networks.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Builtin architecture.
    #[arg(long, default_value = "idnet4", value_parser = parse_model)]
    pub model: BuiltinModel,
    /// Divides kernel counts and switches to desk-size kernels when above 1.
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
}

fn parse_model(s: &str) -> std::result::Result<BuiltinModel, String> {
    s.parse().map_err(|e: CoreError| e.to_string())
}

/// Failure caused by the caller rather than by the program.
#[derive(Debug)]
pub struct UserError(pub String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

/// Shorthand for returning a [`UserError`].
#[macro_export]
macro_rules! user_error {
    ($($arg:tt)*) => {
        anyhow::Error::new($crate::UserError(format!($($arg)*)))
    };
}

fn is_user_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        if cause.is::<UserError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return true;
        }
        matches!(
            cause.downcast_ref::<CoreError>(),
            Some(
                CoreError::Config(_)
                    | CoreError::Shape(_)
                    | CoreError::InvalidArgument(_)
                    | CoreError::Format(_)
                    | CoreError::UnsupportedVersion { .. }
                    | CoreError::UnresolvedTarget(_)
                    | CoreError::Io(_)
            )
        )
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DWRECON_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| user_error!("DWRECON_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Reconstruct(a) => reconstruct::run(a),
        Command::Analyze(a) => analyze::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_user_error(&e) { 1 } else { 2 })
        }
    }
}
