//! `irisdedup`: dealer, party and client for three-party iris code
//! deduplication.

mod bench;
mod client;
mod config;
mod dealer;
mod fail;
mod party;
mod wire;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irisdedup_core::engine::{Backend, ProtocolVariant};
use irisdedup_core::iris::{MatchParams, DEFAULT_ROTATIONS};
use serde::Serialize;

use crate::config::Config;
use crate::fail::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "irisdedup", version, about = "Three-party secret-shared iris code deduplication")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic plaintext database.
    GenDb {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 12800)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability that a mask bit is set.
        #[arg(long, default_value_t = 0.75)]
        density: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Secret-share a plaintext database and deal PRF keys.
    Share {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value = "replicated")]
        backend: Backend,
        /// Variants the shares must support, or `all`.
        #[arg(long = "variant", default_value = "all")]
        variants: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Deterministic dealing, for tests only.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one party until a client asks it to shut down.
    Party {
        #[arg(long)]
        config: PathBuf,
    },
    /// Query the parties with a batch of persons.
    Query {
        #[arg(long)]
        config: PathBuf,
        /// Plaintext file in the database format; rows grouped by person.
        #[arg(long)]
        query: PathBuf,
        /// Number of persons to take from the file; all by default.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, default_value_t = 1)]
        eyes: usize,
        #[arg(long, default_value_t = DEFAULT_ROTATIONS)]
        rotations: usize,
        /// A variant name or `all` for the three shared-mask variants;
        /// the config's variant by default.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ask every party to exit.
    Shutdown {
        #[arg(long)]
        config: PathBuf,
    },
    /// Comparison-phase benchmark on synthetic dot products.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        comparisons: usize,
        /// A variant name or `all`.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value_t = 0.375)]
        match_ratio: f64,
        /// Also time the OR-tree over the same number of bits.
        #[arg(long)]
        or_tree: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::GenDb {
            size,
            length,
            seed,
            density,
            out,
        } => dealer::gen_db(size, length, seed, density, &out),
        Cmd::Share {
            db,
            backend,
            variants,
            out_dir,
            seed,
        } => {
            let variants = dealer::parse_variants(&variants)?;
            for path in dealer::share(&db, backend, &variants, &out_dir, seed)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Cmd::Party { config } => party::run(&Config::load(&config)?),
        Cmd::Query {
            config,
            query,
            batch,
            eyes,
            rotations,
            variant,
            stats,
            seed,
        } => {
            let cfg = Config::load(&config)?;
            let variants = match variant.as_deref() {
                None => vec![cfg.variant],
                Some("all") => ProtocolVariant::SHARED_MASK.to_vec(),
                Some(v) => vec![v.parse()?],
            };
            let args = client::QueryArgs {
                query: &query,
                batch,
                eyes,
                rotations,
                variants,
                seed,
            };
            let report = client::query(&cfg, &args)?;
            if let Some(run) = report.runs.first() {
                for (i, m) in run.matches.iter().enumerate() {
                    println!("person {i}: {m}");
                }
            }
            match stats {
                Some(path) => write_json(&path, &report),
                None => Ok(()),
            }
        }
        Cmd::Shutdown { config } => client::shutdown(&Config::load(&config)?),
        Cmd::Bench {
            comparisons,
            variant,
            repeat,
            match_ratio,
            or_tree,
            seed,
            json,
        } => {
            let variants = dealer::parse_variants(&[variant])?;
            let params = MatchParams::from_ratio(match_ratio, 16)?;
            let report = bench::run(&variants, comparisons, &params, repeat, or_tree, seed)?;
            print!("{}", bench::table(&report));
            match json {
                Some(path) => write_json(&path, &report),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irisdedup: {e}");
            e.exit_code()
        }
    }
}
