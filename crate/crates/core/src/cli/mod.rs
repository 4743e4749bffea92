//! Command-line driver. Exit codes: 0 success, 1 scientific failure,
//! 2 usage or configuration error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{HopfError, Result};
use commands::Context;
use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hopf", version, about = "Hopf bifurcation checks and periodic branch continuation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the hypotheses and write report.json and the resolvent table.
    Check(Common),
    /// Solve the extended system at the critical point.
    Extended(Common),
    /// Continue the periodic branch in the amplitude.
    Branch {
        #[command(flatten)]
        common: Common,
        /// Skip the hypothesis check.
        #[arg(long)]
        skip_check: bool,
    },
    /// Compare the branch with the closed-form semilinear branch.
    VerifyExact(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides output.path.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the randomized probes.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// More logging; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn init_logging(level: u8) {
    let filter = match level {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(filter).parse_default_env().try_init();
}

fn exit_code(e: &HopfError) -> i32 {
    match e {
        HopfError::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (common, skip_check) = match &cli.command {
        Command::Check(c) | Command::Extended(c) | Command::VerifyExact(c) => (c, false),
        Command::Branch { common, skip_check } => (common, *skip_check),
    };
    let config = match RunConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    init_logging(common.verbose.max(config.output.verbosity));
    let ctx = Context {
        out: common.out.clone().unwrap_or_else(|| config.output.path.clone()),
        config,
        config_path: common.config.clone(),
        seed: common.seed,
    };
    println!("seed {}", ctx.seed);

    let dispatch = || -> Result<i32> {
        match &cli.command {
            Command::Check(_) => commands::check(&ctx),
            Command::Extended(_) => commands::extended(&ctx),
            Command::Branch { .. } => commands::branch(&ctx, skip_check),
            Command::VerifyExact(_) => commands::verify_exact(&ctx),
        }
    };
    let outcome = match common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(dispatch),
            Err(e) => Err(HopfError::Config(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
