mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kinetic_pn::bigfloat::{ExtendedReal, Precision};
use kinetic_pn::error::Error;
use kinetic_pn::moment_system::Rational;

/// P_N moment solver and convergence studies for the diffusive transport
/// equation on a periodic slab.
#[derive(Debug, Parser)]
#[command(name = "kinetic-pn", version)]
struct Cli {
    /// Working precision in bits; 53 selects native double arithmetic.
    #[arg(long, global = true, default_value_t = 256)]
    precision: u32,

    /// Significant digits in rounded outputs.
    #[arg(long, global = true, default_value_t = 6)]
    digits: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one moment system and write its spectral state.
    Solve(SolveArgs),
    /// Convergence tables over the scaling parameters 2 * 4^-m, m = 1..5.
    Table {
        #[command(subcommand)]
        kind: TableKind,
    },
    /// Plot data for error-ratio and a_n-ratio studies.
    Figure {
        #[command(subcommand)]
        kind: FigureKind,
    },
    /// A-priori error bounds against computed errors.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// g1, g2, g3 or file:<path>
    #[arg(long)]
    ic: String,
    #[arg(long = "N")]
    order: usize,
    #[arg(long)]
    eps: Rational,
    #[arg(long)]
    t: Rational,
    /// Fourier cutoff; defaults to the built-in resolution table.
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    ic: String,
    #[arg(long)]
    t: Rational,
    /// Fourier cutoff; defaults to the built-in resolution table.
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum TableKind {
    /// Total error for orders 1..=Nmax.
    Total {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long = "Nmax")]
        max_order: usize,
    },
    /// Error in each moment of a fixed order.
    Moment {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long = "N")]
        order: usize,
    },
    /// Norm of each moment of a fixed order.
    Coefficient {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long = "N")]
        order: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RatioKind {
    Total,
    M0,
    M1,
    M2,
}

#[derive(Debug, Subcommand)]
enum FigureKind {
    /// Normalized ratios of errors at consecutive orders.
    Ratio {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_enum)]
        quantity: RatioKind,
        #[arg(long = "Nmax", default_value_t = 12)]
        max_order: usize,
        /// Comma-separated scaling parameters; defaults to the full grid.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<Rational>>,
    },
    /// Ratios a_{n+1}(s) / a_n(s) of the truncated sums.
    AnRatio {
        #[arg(long)]
        s: Rational,
        #[arg(long)]
        nmax: u32,
        #[arg(long = "K", default_value_t = 1000)]
        cutoff: usize,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    ic: String,
    #[arg(long = "N")]
    order: usize,
    #[arg(long)]
    eps: Rational,
    #[arg(long)]
    t: Rational,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Arith(_) | Error::BelowFloor(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(value) = std::env::var("PN_THREADS") {
        let n: usize = value.trim().parse().map_err(|_| Error::Config(format!("PN_THREADS={value:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    configure_threads()?;
    let prec = Precision::new(cli.precision).map_err(|e| Error::Config(e.to_string()))?;
    let start = Instant::now();
    let run = if prec == Precision::DOUBLE {
        commands::execute::<f64>(&cli.command, prec, cli.digits)?
    } else {
        commands::execute::<ExtendedReal>(&cli.command, prec, cli.digits)?
    };
    let args: Vec<String> = std::env::args().collect();
    manifest::append(&run, &args, prec, start.elapsed())?;
    for path in &run.outputs {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("kinetic-pn: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
