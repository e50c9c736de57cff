use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use qmoe::codec::encode;
use qmoe::dict::Dictionary;
use qmoe::pipeline::{
    run_block, CompressSettings, ListBuffer, QuantMethod, RandomDense, RouterConfig, RouterSim,
    TierStore,
};
use qmoe::quant::{GridMode, SolveOutcome, TokenBlock, WeightMatrix};
use qmoe::stats::{compression_rate, RateReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::files::save_checkpoint;
use crate::run_config::{RunConfig, RunRecord};
use crate::{Bits, Method};

#[derive(Debug)]
pub struct FallbackLimitExceeded {
    pub fallbacks: usize,
    pub experts: usize,
    pub limit: f64,
}

impl fmt::Display for FallbackLimitExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} of {} experts fell back to round-to-nearest, above the limit of {}",
            self.fallbacks, self.experts, self.limit
        )
    }
}

impl std::error::Error for FallbackLimitExceeded {}

#[derive(Debug, Serialize)]
pub struct ExpertReport {
    pub expert: usize,
    pub tokens: usize,
    pub hessian_tokens: usize,
    pub outcome: String,
    pub objective: f64,
    pub sparsity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct LayerReport {
    pub layer: usize,
    pub sparsity: f64,
    pub mean_objective: f64,
    pub fallbacks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateReport>,
    pub experts: Vec<ExpertReport>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub method: Method,
    pub bits: Bits,
    pub dictionary_hash: String,
    pub sparsity: f64,
    pub fallbacks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateReport>,
    pub layers: Vec<LayerReport>,
}

fn outcome_name(o: SolveOutcome) -> String {
    match o {
        SolveOutcome::Gptq => "gptq".into(),
        SolveOutcome::Rtn => "rtn".into(),
        SolveOutcome::RtnFallback(reason) => format!("rtn_fallback({reason:?})"),
    }
}

fn calibration_buffer(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<ListBuffer> {
    let s = &cfg.synthetic;
    let mut buffer = ListBuffer::new(s.dim)?;
    for _ in 0..s.samples {
        let data = (0..s.tokens_per_sample * s.dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let special: Vec<bool> = (0..s.tokens_per_sample)
            .map(|_| rng.random::<f64>() < s.mask_rate)
            .collect();
        buffer.append_sample_masked(&TokenBlock::new(s.dim, data)?, &special)?;
    }
    Ok(buffer)
}

/// Runs the calibration pipeline layer by layer over a synthetic model and
/// writes checkpoints, `report.json` and `run.toml` into `out`.
pub fn compress(
    cfg: &RunConfig,
    dict: &Dictionary,
    method: Method,
    bits: Bits,
    out: &Path,
) -> Result<RunReport> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let s = &cfg.synthetic;
    let mode = match bits {
        Bits::Ternary => GridMode::Ternary,
        Bits::TwoBit => GridMode::TwoBit,
    };
    let settings = CompressSettings::new(
        match method {
            Method::Rtn => QuantMethod::Rtn,
            Method::Gptq => QuantMethod::Gptq,
        },
        mode,
    );
    let mut block_cfg = cfg.pipeline.block_config();
    block_cfg.compress = Some(settings);

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut tier = TierStore::new(
        calibration_buffer(cfg, &mut rng)?,
        cfg.pipeline.fast_capacity,
    )?;
    let mut layers = Vec::with_capacity(s.layers);
    let mut all_rates = Vec::new();

    for layer in 0..s.layers {
        let experts: Vec<WeightMatrix> = (0..cfg.pipeline.num_experts)
            .map(|_| {
                let v = (0..s.dim * s.dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * s.weight_scale)
                    .collect();
                WeightMatrix::new(s.dim, s.dim, v)
            })
            .collect::<qmoe::Result<_>>()?;
        let dense = RandomDense::new(s.dim, s.seed.wrapping_add(1 + layer as u64));
        let router_cfg = RouterConfig {
            seed: cfg.pipeline.router.seed.wrapping_add(layer as u64),
            ..cfg.pipeline.router.clone()
        };
        let router = RouterSim::new(cfg.pipeline.num_experts, s.dim, router_cfg.rule())?;
        let block = run_block(&mut tier, &dense, &router, &experts, &block_cfg)
            .with_context(|| format!("layer {layer}"))?;

        let mut reports = Vec::new();
        let mut rates = Vec::new();
        let mut zeros = 0.0;
        for (e, ce) in block.experts.into_iter().enumerate() {
            let ce = ce.expect("compression enabled");
            let sparsity = ce.quantized.zero_fraction();
            zeros += sparsity;
            let (rate, checkpoint) = if bits == Bits::Ternary {
                let c = encode(&ce.quantized.into_ternary()?, dict)?;
                let name = format!("layer_{layer:02}_expert_{e:03}.qmoe");
                save_checkpoint(&c, &out.join(&name))?;
                let r = compression_rate(&c);
                rates.push(r);
                (Some(r.moe_only_rate), Some(name))
            } else {
                (None, None)
            };
            reports.push(ExpertReport {
                expert: e,
                tokens: block.plans[e].total,
                hessian_tokens: block.plans[e].hessian_tokens,
                outcome: outcome_name(ce.outcome),
                objective: ce.objective,
                sparsity,
                rate,
                checkpoint,
            });
        }
        let n = reports.len() as f64;
        all_rates.extend_from_slice(&rates);
        layers.push(LayerReport {
            layer,
            sparsity: zeros / n,
            mean_objective: reports.iter().map(|r| r.objective).sum::<f64>() / n,
            fallbacks: reports
                .iter()
                .filter(|r| r.outcome.starts_with("rtn_fallback"))
                .count(),
            rate: (!rates.is_empty()).then(|| RateReport::combine(&rates)),
            experts: reports,
        });
    }

    let report = RunReport {
        method,
        bits,
        dictionary_hash: format!("{:016x}", dict.hash()),
        sparsity: layers.iter().map(|l| l.sparsity).sum::<f64>() / layers.len() as f64,
        fallbacks: layers.iter().map(|l| l.fallbacks).sum(),
        rate: (!all_rates.is_empty()).then(|| RateReport::combine(&all_rates)),
        layers,
    };
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let record = RunRecord {
        method,
        bits,
        dictionary_hash: report.dictionary_hash.clone(),
        dictionary_p0: dict.p0(),
        config: cfg,
    };
    fs::write(out.join("run.toml"), toml::to_string(&record)?)?;
    Ok(report)
}

pub fn check_fallbacks(report: &RunReport, cfg: &RunConfig) -> Result<()> {
    let experts = report.layers.len() * cfg.pipeline.num_experts;
    if report.fallbacks as f64 > cfg.max_fallback_fraction * experts as f64 {
        return Err(FallbackLimitExceeded {
            fallbacks: report.fallbacks,
            experts,
            limit: cfg.max_fallback_fraction,
        }
        .into());
    }
    Ok(())
}
