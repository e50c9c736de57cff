mod commands;
mod compress;
mod files;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::compress::FallbackLimitExceeded;

#[derive(Debug, Parser)]
#[command(
    name = "qmoe",
    version,
    about = "Sub-1-bit compression of mixture-of-experts layers"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the shared decoding dictionary.
    GenDict {
        #[arg(long, default_value_t = qmoe::dict::DEFAULT_P0)]
        p0: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate and compress a synthetic MoE model described by a TOML config.
    Compress {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Method,
        #[arg(long, value_enum)]
        bits: Bits,
    },
    /// Dump a checkpoint as raw ternary codes plus per-row min/max.
    Decompress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fused decompress + matrix-vector product.
    Matvec {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        /// Raw little-endian f32 input vector.
        #[arg(long)]
        x: PathBuf,
        /// Raw little-endian f32 output vector.
        #[arg(long)]
        y: PathBuf,
    },
    /// Storage accounting of a checkpoint.
    Rates {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Sample an i.i.d. ternary matrix and report its sparsity and rate.
    Sample {
        #[arg(long, default_value_t = qmoe::dict::DEFAULT_P0)]
        p0: f64,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dictionary used for the rate; without it only sparsity is shown.
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Write the encoded sample as a checkpoint (needs --dict).
        #[arg(long, requires = "dict")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rtn,
    Gptq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Bits {
    #[value(name = "ternary")]
    #[serde(rename = "ternary")]
    Ternary,
    #[value(name = "2bit")]
    #[serde(rename = "2bit")]
    TwoBit,
}

const EXIT_USAGE: u8 = 1;
const EXIT_CORRUPT: u8 = 2;
const EXIT_FALLBACK: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<FallbackLimitExceeded>().is_some() {
        return EXIT_FALLBACK;
    }
    match e.downcast_ref::<qmoe::Error>() {
        Some(qmoe::Error::Corrupt(_) | qmoe::Error::DictionaryMismatch { .. }) => EXIT_CORRUPT,
        _ => EXIT_USAGE,
    }
}
