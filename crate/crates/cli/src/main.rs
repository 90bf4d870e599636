//! r2cs: searches and verifications around the internal points of the conic
//! X0 X1 - X2^2 in PG(2, q^n).
//!
//! Subcommands mirror the pipeline: `bounds` prints the feasible fields,
//! `sublines` counts fully internal sublines on a reference line,
//! `subplanes` and `rank-sets` run the linear-set searches, `verify` checks
//! a semifield family, and `replay` re-verifies a stored report.
//!
//! Exit codes: 0 success, 2 infeasible parameters, 3 verification or cache
//! failure, 1 anything else.

mod cache;
mod report;
mod stages;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use r2cs_core::error::Error;
use report::{render, Envelope, Format};
use stages::{Config, Family};

#[derive(Parser)]
#[command(
    name = "r2cs",
    version,
    about = "Linear-set searches inside the internal points of a conic, with replayable reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FieldArgs {
    /// Characteristic, an odd prime.
    #[arg(long)]
    p: u64,
    /// Degree of the small field over the prime field; q = p^e.
    #[arg(long, default_value_t = 1)]
    e: u32,
    /// Extension degree; the ambient plane is PG(2, q^n).
    #[arg(long)]
    n: u32,
    /// Modulus coefficients over F_p, ascending degree (default: built-in).
    #[arg(long, value_delimiter = ',')]
    modulus: Option<Vec<u64>>,
    /// Element key of the frame constant eta (default: canonical choice).
    #[arg(long)]
    eta: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Checkpoint directory; $R2CS_CACHE_DIR when unset, no cache otherwise.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when the nonexistence bounds say the search is vacuous.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
    Text,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Json => Format::Json,
            OutFormat::Csv => Format::Csv,
            OutFormat::Text => Format::Text,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Dickson,
    CohenGanley,
    PenttilaWilliams,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Dickson => Family::Dickson,
            FamilyArg::CohenGanley => Family::CohenGanley,
            FamilyArg::PenttilaWilliams => Family::PenttilaWilliams,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the q values the nonexistence bounds leave open for degree n.
    Bounds {
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Count fully internal sublines through x on a reference line.
    Sublines {
        #[command(flatten)]
        field: FieldArgs,
        /// Scan the secant reference line instead of the external one.
        #[arg(long)]
        secant: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Find internal subplanes; full census where implemented (q=3, n=4).
    Subplanes {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exhaustive search for rank-4 or rank-5 linear sets through x.
    RankSets {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(4..=5))]
        rank: u8,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check the defining properties of a semifield family.
    Verify {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Characteristic (default 3).
        #[arg(long)]
        p: Option<u64>,
        /// Small-field degree (default 1).
        #[arg(long)]
        e: Option<u32>,
        /// Extension degree (default: 5 for penttila-williams, else 2).
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        modulus: Option<Vec<u64>>,
        #[arg(long)]
        eta: Option<u32>,
        /// Pseudorandom product samples on top of the kernel sweep.
        #[arg(long, default_value_t = 10_000_000)]
        trials: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-verify every witness in a stored report without re-searching.
    Replay { file: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InfeasibleField(_) | Error::OutOfBounds { .. } => 2,
        Error::BadCache(_) | Error::BadWitness(_) | Error::SearchInvariant(_) => 3,
        _ => 1,
    }
}

fn config(field: FieldArgs, run: &RunArgs) -> Config {
    Config {
        p: field.p,
        e: field.e,
        n: field.n,
        modulus: field.modulus,
        eta: field.eta,
        cache_dir: cache_dir(run),
        force: run.force,
    }
}

fn cache_dir(run: &RunArgs) -> Option<PathBuf> {
    run.cache_dir
        .clone()
        .or_else(|| std::env::var_os("R2CS_CACHE_DIR").map(PathBuf::from))
}

fn init_threads(run: &RunArgs) {
    if let Some(t) = run.threads {
        // Ignore failure: the global pool can only be configured once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
}

fn emit(env: &Envelope, run: &RunArgs) -> r2cs_core::error::Result<()> {
    let text = render(env, run.format.into())?;
    match &run.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> r2cs_core::error::Result<i32> {
    match cli.command {
        Command::Bounds { n, run } => {
            init_threads(&run);
            let env = stages::bounds(n)?;
            emit(&env, &run)?;
            Ok(0)
        }
        Command::Sublines { field, secant, run } => {
            init_threads(&run);
            let cfg = config(field, &run);
            let env = stages::sublines(&cfg, secant)?;
            emit(&env, &run)?;
            Ok(0)
        }
        Command::Subplanes { field, run } => {
            init_threads(&run);
            let cfg = config(field, &run);
            let env = stages::subplanes(&cfg)?;
            emit(&env, &run)?;
            Ok(0)
        }
        Command::RankSets { field, rank, run } => {
            init_threads(&run);
            let cfg = config(field, &run);
            let env = stages::rank_sets(&cfg, rank)?;
            emit(&env, &run)?;
            Ok(0)
        }
        Command::Verify {
            family,
            p,
            e,
            n,
            modulus,
            eta,
            trials,
            run,
        } => {
            init_threads(&run);
            let family: Family = family.into();
            let cfg = Config {
                p: p.unwrap_or(3),
                e: e.unwrap_or(1),
                n: n.unwrap_or(match family {
                    Family::PenttilaWilliams => 5,
                    _ => 2,
                }),
                modulus,
                eta,
                cache_dir: cache_dir(&run),
                force: run.force,
            };
            let env = stages::verify(&cfg, family, trials)?;
            let pass = stages::checks_pass(&env);
            emit(&env, &run)?;
            Ok(if pass { 0 } else { 3 })
        }
        Command::Replay { file } => {
            let failures = stages::replay(&file)?;
            if failures.is_empty() {
                println!("replay: report verified");
                Ok(0)
            } else {
                for f in &failures {
                    eprintln!("replay: {f}");
                }
                Ok(3)
            }
        }
    }
}
