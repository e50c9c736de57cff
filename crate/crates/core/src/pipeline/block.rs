use std::ops::Range;

use super::dense::DenseLayer;
use super::router::RouterSim;
use super::tier::{Staged, TierStore, TransferCounters};
use crate::quant::{
    accumulate_hessian, gptq_quantize, make_grid, objective, rtn_quantize, ExpertGroup, GridMode,
    Hessian, QuantizedMatrix, SolveOutcome, TokenBlock, WeightMatrix, DEFAULT_DAMPING,
    DEFAULT_GROUP_SIZE,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantMethod {
    Rtn,
    Gptq,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressSettings {
    pub method: QuantMethod,
    pub mode: GridMode,
    pub damping: f64,
}

impl CompressSettings {
    pub fn new(method: QuantMethod, mode: GridMode) -> Self {
        Self {
            method,
            mode,
            damping: DEFAULT_DAMPING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConfig {
    /// `None` runs the experts uncompressed.
    pub compress: Option<CompressSettings>,
    pub group_size: usize,
    pub cap_multiplier: f64,
    /// Drop special tokens from Hessian accumulation.
    pub mask_special: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            compress: None,
            group_size: DEFAULT_GROUP_SIZE,
            cap_multiplier: 4.0,
            mask_special: false,
        }
    }
}

/// How one expert's tokens are processed in the sparse phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapPlan {
    pub total: usize,
    /// Buffer-order prefix of the expert's tokens used for its Hessian.
    pub hessian_tokens: usize,
    /// Fast-tier sized chunks covering all `total` tokens. The Hessian
    /// prefix always lies inside the first chunk.
    pub chunks: Vec<Range<usize>>,
}

/// `ceil(multiplier * mean(counts))`.
pub fn token_cap(all_counts: &[usize], multiplier: f64) -> usize {
    if all_counts.is_empty() {
        return 0;
    }
    let sum: usize = all_counts.iter().sum();
    let exact = multiplier * sum as f64 / all_counts.len() as f64;
    // Keep exact integers like 4 * 1000.75 from rounding up on fp noise.
    (exact - exact.abs() * 1e-12).ceil().max(0.0) as usize
}

/// Plans an expert with `count` tokens: the Hessian sees at most
/// [`token_cap`] tokens (and never more than fit in the fast tier), while
/// outputs are computed for every token in chunks of `fast_capacity`.
pub fn cap_tokens(
    count: usize,
    all_counts: &[usize],
    multiplier: f64,
    fast_capacity: usize,
) -> CapPlan {
    let cap = token_cap(all_counts, multiplier);
    let chunk = fast_capacity.max(1);
    let chunks = (0..count)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(count))
        .collect();
    CapPlan {
        total: count,
        hessian_tokens: count.min(cap).min(chunk),
        chunks,
    }
}

#[derive(Debug, Clone)]
pub struct CompressedExpert {
    pub quantized: QuantizedMatrix,
    pub outcome: SolveOutcome,
    pub hessian: Hessian,
    /// `‖Q X − W X‖²` over the Hessian tokens.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub expert_counts: Vec<usize>,
    pub plans: Vec<CapPlan>,
    /// Present when compression was enabled.
    pub experts: Vec<Option<CompressedExpert>>,
    /// Tier traffic of this block alone.
    pub transfers: TransferCounters,
    pub peak_fast_occupancy: usize,
}

impl BlockReport {
    pub fn fallbacks(&self) -> usize {
        self.experts
            .iter()
            .flatten()
            .filter(|e| e.outcome.is_fallback())
            .count()
    }
}

/// Runs one block: the dense phase over every sample, then the sparse phase
/// over every expert, compressing experts in groups when configured.
pub fn run_block(
    tier: &mut TierStore,
    dense: &dyn DenseLayer,
    router: &RouterSim,
    experts: &[WeightMatrix],
    cfg: &BlockConfig,
) -> Result<BlockReport> {
    let dim = tier.buffer().dim();
    if experts.len() != router.num_experts() {
        return Err(Error::shape(format!(
            "{} expert matrices for a router over {} experts",
            experts.len(),
            router.num_experts()
        )));
    }
    if let Some(bad) = experts
        .iter()
        .position(|w| w.rows() != dim || w.cols() != dim)
    {
        return Err(Error::shape(format!("expert {bad} is not {dim}x{dim}")));
    }
    if cfg.group_size == 0 {
        return Err(Error::invalid("group size must be at least 1"));
    }
    let start = tier.counters().clone();
    let peak_before = tier.peak_occupancy();

    dense_phase(tier, dense, router)?;

    let counts = tier.buffer().expert_counts(experts.len());
    let plans: Vec<CapPlan> = counts
        .iter()
        .map(|&c| cap_tokens(c, &counts, cfg.cap_multiplier, tier.fast_capacity()))
        .collect();
    let mut compressed = vec![None; experts.len()];

    let ids: Vec<usize> = (0..experts.len()).collect();
    for group in ids.chunks(cfg.group_size) {
        let mut pending = group.iter().copied().peekable();
        while pending.peek().is_some() {
            // Stage first chunks of as many group members as fit at once.
            let mut batch: Vec<(usize, Vec<usize>, Staged)> = Vec::new();
            while let Some(&e) = pending.peek() {
                let first = plans[e].chunks.first().map_or(0, |c| c.len());
                if !batch.is_empty() && first > tier.free() {
                    break;
                }
                pending.next();
                let positions = tier.buffer().expert_positions(e as u32);
                let staged = tier.fetch(&positions[..first])?;
                batch.push((e, positions, staged));
            }

            let effective = compress_batch(&batch, experts, &plans, cfg, &mut compressed)?;

            for ((e, positions, staged), w) in batch.into_iter().zip(effective) {
                let out = staged.tokens.transform(&w);
                tier.write_back(staged, &out)?;
                for chunk in plans[e].chunks.iter().skip(1) {
                    let staged = tier.fetch(&positions[chunk.clone()])?;
                    let out = staged.tokens.transform(&w);
                    tier.write_back(staged, &out)?;
                }
            }
        }
    }

    Ok(BlockReport {
        expert_counts: counts,
        plans,
        experts: compressed,
        transfers: tier.counters().since(&start),
        peak_fast_occupancy: tier.peak_occupancy().max(peak_before),
    })
}

fn dense_phase(tier: &mut TierStore, dense: &dyn DenseLayer, router: &RouterSim) -> Result<()> {
    let dim = tier.buffer().dim();
    for s in 0..tier.buffer().num_samples() {
        let range = tier.buffer().sample_range(s);
        let positions: Vec<usize> = range.clone().collect();
        let staged = tier.fetch(&positions)?;
        let y = dense.forward(&staged.tokens);
        if y.len() != staged.len() || (!y.is_empty() && y.dim() != dim) {
            tier.discard(staged);
            return Err(Error::shape("dense layer changed the sample shape"));
        }
        for (p, t) in range.zip(y.tokens()) {
            let e = router.assign(t);
            tier.buffer_mut().set_assignment(p, e);
        }
        tier.write_back(staged, &y)?;
    }
    Ok(())
}

/// Compresses the experts of a staged batch and returns the weights their
/// tokens should be run through.
fn compress_batch(
    batch: &[(usize, Vec<usize>, Staged)],
    experts: &[WeightMatrix],
    plans: &[CapPlan],
    cfg: &BlockConfig,
    out: &mut [Option<CompressedExpert>],
) -> Result<Vec<WeightMatrix>> {
    let Some(settings) = cfg.compress else {
        return Ok(batch.iter().map(|(e, _, _)| experts[*e].clone()).collect());
    };

    let mut members = Vec::with_capacity(batch.len());
    for (e, _, staged) in batch {
        let h = plans[*e].hessian_tokens;
        let data = staged.tokens.data()[..h * staged.tokens.dim()].to_vec();
        let tokens = TokenBlock::new(staged.tokens.dim(), data)?;
        let mask = cfg.mask_special.then(|| &staged.special[..h]);
        members.push((experts[*e].clone(), accumulate_hessian(&tokens, mask)?));
    }

    let (matrices, outcomes) = match settings.method {
        QuantMethod::Gptq => {
            let group = ExpertGroup::new(members.clone())?;
            let sol = gptq_quantize(&group, settings.mode, settings.damping)?;
            (sol.matrices, sol.outcomes)
        }
        QuantMethod::Rtn => (
            members
                .iter()
                .map(|(w, _)| rtn_quantize(w, &make_grid(w, settings.mode)))
                .collect(),
            vec![SolveOutcome::Rtn; members.len()],
        ),
    };

    let mut effective = Vec::with_capacity(batch.len());
    for (((e, _, _), (w, h)), (q, outcome)) in batch
        .iter()
        .zip(members)
        .zip(matrices.into_iter().zip(outcomes))
    {
        effective.push(q.dequantized_matrix());
        out[*e] = Some(CompressedExpert {
            objective: objective(&w, &q, &h),
            quantized: q,
            outcome,
            hessian: h,
        });
    }
    Ok(effective)
}
