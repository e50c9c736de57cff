use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use qmoe::bf16;
use qmoe::codec::{decompress, encode, fused_matvec};
use qmoe::dict::{generate_dictionary, PairDistribution};
use qmoe::stats::{compression_rate, natural_sparsity, sample_ternary, theoretical_limit};
use serde::Serialize;

use crate::compress::{check_fallbacks, compress};
use crate::files::{
    load_checkpoint, load_dictionary, read_vector, save_checkpoint, save_dictionary, ternary_dump,
    write_vector,
};
use crate::run_config::RunConfig;
use crate::Command;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenDict { p0, out } => gen_dict(p0, &out),
        Command::Compress {
            config,
            dict,
            out,
            mode,
            bits,
        } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg =
                RunConfig::parse(&text).with_context(|| format!("parsing {}", config.display()))?;
            let dict = load_dictionary(&dict)?;
            let report = compress(&cfg, &dict, mode, bits, &out)?;
            for l in &report.layers {
                print!(
                    "layer {}: sparsity {:.4}, mean objective {:.6e}",
                    l.layer, l.sparsity, l.mean_objective
                );
                if let Some(r) = &l.rate {
                    print!(", rate {:.2}x", r.moe_only_rate);
                }
                println!(", fallbacks {}", l.fallbacks);
            }
            if let Some(r) = &report.rate {
                println!(
                    "total rate {:.2}x ({:.4} bits/parameter)",
                    r.moe_only_rate, r.bits_per_parameter
                );
            }
            check_fallbacks(&report, &cfg)
        }
        Command::Decompress { input, dict, out } => {
            let dict = load_dictionary(&dict)?;
            let t = decompress(&load_checkpoint(&input)?, &dict)?;
            fs::write(&out, ternary_dump(&t))
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Matvec { input, dict, x, y } => {
            let dict = load_dictionary(&dict)?;
            let c = load_checkpoint(&input)?;
            let xv = read_vector(&x)?;
            let mut out = vec![bf16::ZERO; c.rows];
            fused_matvec(&c, &xv, &dict, &mut out)?;
            write_vector(&y, &out.iter().map(|v| v.to_f32()).collect::<Vec<_>>())
        }
        Command::Rates { input, dict, json } => rates(&input, &dict, json),
        Command::Sample {
            p0,
            rows,
            cols,
            seed,
            dict,
            out,
        } => {
            let dist = PairDistribution::new(p0)?;
            let t = sample_ternary(&dist, rows, cols, seed);
            println!("sparsity: {:.6}", natural_sparsity(&t)?);
            if let Ok(limit) = theoretical_limit(&dist) {
                println!("limit:    {limit:.2}x");
            }
            if let Some(path) = dict {
                let dict = load_dictionary(&path)?;
                let c = encode(&t, &dict)?;
                print!("{}", compression_rate(&c).to_text());
                if let Some(out) = out {
                    save_checkpoint(&c, &out)?;
                }
            }
            Ok(())
        }
    }
}

fn gen_dict(p0: f64, out: &Path) -> Result<()> {
    let dict = generate_dictionary(&PairDistribution::new(p0)?)?;
    save_dictionary(&dict, out)?;
    println!("{} entries, p0 {p0}, hash {:016x}", dict.len(), dict.hash());
    Ok(())
}

#[derive(Serialize)]
struct RatesOutput {
    rows: usize,
    cols: usize,
    sparsity: f64,
    #[serde(flatten)]
    rate: qmoe::stats::RateReport,
}

fn rates(input: &Path, dict: &Path, json: bool) -> Result<()> {
    let dict = load_dictionary(dict)?;
    let c = load_checkpoint(input)?;
    let t = decompress(&c, &dict)?;
    let out = RatesOutput {
        rows: c.rows,
        cols: c.cols,
        sparsity: natural_sparsity(&t)?,
        rate: compression_rate(&c),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("shape:              {}x{}", out.rows, out.cols);
        println!("sparsity:           {:.4}", out.sparsity);
        print!("{}", out.rate.to_text());
    }
    Ok(())
}
