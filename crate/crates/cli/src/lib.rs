//! The `chfif` command-line tool.
//!
//! [`run`] parses arguments, executes one subcommand and returns the exit
//! code: 0 on success, 1 when a verification fails, 2 on bad input.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, EXIT_BAD_INPUT, EXIT_FAILURE};

#[derive(Debug, Parser)]
#[command(name = "chfif", version, about = "Hidden-variable fractal interpolation bases, wavelets and transforms")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Number of maps N.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Named parameter set (`paper-sec4`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Sampling or quadrature depth.
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    /// Tolerance for the command's pass/fail decision or solver.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for random starts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the artifact here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the orthogonal scaling basis and write it as JSON.
    BuildBasis,
    /// Template and translate Gram matrices.
    Gram {
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Check orthogonality, Riesz bounds and the constant expansion.
    VerifyBasis {
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    #[command(subcommand)]
    Wavelets(WaveletsCommand),
    /// Sample a system (`--system`) or solved wavelets (`--wavelets`) as CSV.
    Sample {
        #[arg(long, conflicts_with = "wavelets")]
        system: Option<PathBuf>,
        #[arg(long)]
        wavelets: Option<PathBuf>,
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    #[command(subcommand)]
    Transform(TransformCommand),
    /// Run every check and print a pass/fail summary.
    Report,
}

#[derive(Debug, Subcommand)]
pub enum WaveletsCommand {
    /// Solve for the wavelet knot values (N = 2).
    Solve {
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Evaluate the orthogonality and norm residuals of a solution.
    Verify {
        #[arg(long, required_unless_present = "published", conflicts_with = "published")]
        solution: Option<PathBuf>,
        /// Use the published knot table.
        #[arg(long)]
        published: bool,
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Write the published knot table as a solution file.
    Table,
}

#[derive(Debug, Subcommand)]
pub enum TransformCommand {
    /// Project a sampled signal and split it over `--levels` levels.
    Decompose {
        /// CSV with columns `x,value`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        wavelets: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        /// Level of the projection space.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        level: i32,
    },
    /// Invert a multilevel decomposition.
    Reconstruct {
        /// Output of `transform decompose`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        wavelets: PathBuf,
    },
}

/// Runs the tool and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let error_json = args.iter().any(|a| a == "--error-json");
    let report = |e: CliError, err: &mut dyn Write| {
        let _ = if error_json {
            writeln!(err, "{}", e.to_json())
        } else {
            writeln!(err, "error: {e}")
        };
        e.exit_code()
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
        Err(e) if error_json => return report(CliError::input(e.kind().to_string()), err),
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return EXIT_BAD_INPUT;
        }
    };
    match commands::dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => report(e, err),
    }
}
