//! Command-line harness: verification suites, benchmarks and matrix import.
//!
//! Exit codes: 0 on success, 1 when a verification suite fails, 2 on usage
//! or format errors.

pub mod bench;
pub mod io;
pub mod synth;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attention::Mode;
use crate::error::{McaError, Result};
use bench::{run_bench, BenchParams};
use io::{import_attention, read_matrix, write_matrix, MatrixFormat};
use synth::AttentionKind;
use verify::{run_suite, Suite, VerifyParams};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mca", version, about = "Monte-Carlo attention verification and benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a statistical verification suite and print its CSV report.
    Verify(VerifyArgs),
    /// Compare regular and approximation modes on the same input.
    Bench(BenchArgs),
    /// Validate a matrix file and optionally convert it.
    Import(ImportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Regular,
    Approx,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed.
    #[arg(long, env = "MCA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// `MxKxP` for unbiased/scaling, `NxD` for theorem1-*, `D` for lemma1.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Sample counts, comma separated.
    #[arg(long = "r", value_delimiter = ',')]
    pub samples: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Random fixtures for lemma1 and budget.
    #[arg(long, default_value_t = 10)]
    pub fixtures: usize,
    /// Lift the desk-scale dimension limits.
    #[arg(long)]
    pub large: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Attention matrix file; without it a synthetic attention is used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Mcam)]
    pub format: MatrixFormat,
    #[arg(long, value_enum, default_value_t = AttentionKind::Computed)]
    pub synthetic: AttentionKind,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,1.0")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub heads: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Approx)]
    pub mode: ModeArg,
    /// `NxD`; with `--input`, N comes from the file.
    #[arg(long, value_parser = parse_dims, default_value = "32x128")]
    pub dims: Dims,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Mcam)]
    pub format: MatrixFormat,
    /// Validate as an attention matrix (square, non-negative, rows sum to 1).
    #[arg(long)]
    pub attention: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Mcam)]
    pub output_format: MatrixFormat,
}

/// Dimensions written as `NxD` or `MxKxP`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

fn parse_dims(s: &str) -> std::result::Result<Dims, String> {
    s.split(['x', 'X'])
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| format!("invalid dimension {part:?} in {s:?}"))
        })
        .collect::<std::result::Result<_, _>>()
        .map(Dims)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(McaError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| McaError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Verify(args) => {
            let params = VerifyParams {
                trials: args.trials,
                seed: args.common.seed,
                dims: args.dims.map(|d| d.0),
                alphas: args.alpha,
                samples: args.samples,
                delta: args.delta,
                fixtures: args.fixtures,
                allow_large: args.large,
            };
            let report = with_threads(args.common.threads, || run_suite(args.suite, &params))??;
            write!(out, "{}", report.to_csv())?;
            Ok(if report.passed() { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Bench(args) => {
            let [n, d]: [usize; 2] = args.dims.0.as_slice().try_into().map_err(|_| {
                McaError::Config(format!("expected --dims NxD, got {:?}", args.dims.0))
            })?;
            let params = BenchParams {
                input: args.input,
                format: args.format,
                synthetic: args.synthetic,
                temperature: args.temperature,
                blocks: args.blocks,
                alphas: args.alpha,
                heads: args.heads,
                seed: args.common.seed,
                mode: match args.mode {
                    ModeArg::Regular => Mode::Regular,
                    ModeArg::Approx => Mode::Approximation,
                },
                n,
                d,
                ..BenchParams::default()
            };
            let result = with_threads(args.common.threads, || run_bench(&params))??;
            if !result.renormalized_rows.is_empty() {
                writeln!(
                    err,
                    "warning: renormalized attention rows {:?}",
                    result.renormalized_rows
                )?;
            }
            write!(out, "{}", result.to_csv())?;
            Ok(EXIT_PASS)
        }
        Command::Import(args) => {
            let matrix = if args.attention {
                let imported = import_attention(&args.input, args.format)?;
                if !imported.renormalized_rows.is_empty() {
                    writeln!(
                        err,
                        "warning: renormalized attention rows {:?}",
                        imported.renormalized_rows
                    )?;
                }
                imported.matrix
            } else {
                read_matrix(&args.input, args.format)?
            };
            writeln!(out, "rows,cols")?;
            writeln!(out, "{},{}", matrix.rows(), matrix.cols())?;
            if let Some(path) = args.output {
                write_matrix(&path, &matrix, args.output_format)?;
            }
            Ok(EXIT_PASS)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parser() {
        assert_eq!(parse_dims("4x6x5").unwrap(), Dims(vec![4, 6, 5]));
        assert_eq!(parse_dims("16X128").unwrap(), Dims(vec![16, 128]));
        assert!(parse_dims("4x0").is_err());
        assert!(parse_dims("4xq").is_err());
    }

    #[test]
    fn unknown_suite_is_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(["mca", "verify", "--suite", "nope"], &mut out, &mut err);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
    }

    #[test]
    fn too_few_trials_is_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(["mca", "verify", "--suite", "unbiased", "--trials", "5"], &mut out, &mut err);
        assert_eq!(code, EXIT_USAGE);
        assert!(String::from_utf8(err).unwrap().contains("100 trials"));
    }
}
