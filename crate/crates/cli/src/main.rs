mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] lgnet::dataset::DataError),
    #[error(transparent)]
    Net(#[from] lgnet::nn::NetError),
    #[error(transparent)]
    Train(#[from] lgnet::train::TrainError),
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "E_CONFIG",
            CliError::Io(_) => "E_IO",
            CliError::Data(e) => e.code(),
            CliError::Net(_) => "E_NETWORK",
            CliError::Train(e) => e.code(),
            CliError::Verify(_) => "E_VERIFY",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verify(_) => 3,
            _ => 1,
        }
    }
}

/// Legendre-Galerkin datasets, network training and evaluation.
///
/// Any config field can be overridden with `--path.to.field value`.
#[derive(Debug, Parser)]
#[command(name = "lgnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset of forcings and Galerkin solutions
    Generate(Common),
    /// Train a network on a train/test dataset pair
    Train(Common),
    /// Score a checkpoint on a dataset
    Eval(Common),
    /// Manufactured-solution convergence check of the solvers
    VerifySolver(Common),
}

const KNOWN_FLAGS: [&str; 5] = ["config", "out", "seed", "help", "version"];

/// Split `--dotted.key value` / `--key=value` overrides from the flags clap
/// understands.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut plain = Vec::new();
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            plain.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if name.is_empty() || KNOWN_FLAGS.contains(&name.as_str()) {
            plain.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => iter
                .next()
                .ok_or_else(|| CliError::Config(format!("override --{name} needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((plain, overrides))
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(value) = std::env::var("LGNET_THREADS") {
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("LGNET_THREADS must be a positive integer, got '{value}'")))?;
        if n == 0 {
            return Err(CliError::Config("LGNET_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run() -> Result<String, CliError> {
    let (plain, overrides) = split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(plain) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                e.exit();
            }
            return Err(CliError::Config(e.to_string().trim_end().to_string()));
        }
    };
    configure_threads()?;
    let (common, run): (&Common, fn(&RunConfig) -> Result<String, CliError>) = match &cli.command {
        Command::Generate(c) => (c, commands::generate_cmd),
        Command::Train(c) => (c, commands::train_cmd),
        Command::Eval(c) => (c, commands::eval_cmd),
        Command::VerifySolver(c) => (c, commands::verify_cmd),
    };
    let mut cfg = RunConfig::resolve(common.config.as_deref(), &overrides)?;
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    run(&cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code())
        }
    }
}
