use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// How tokens are mapped to experts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RouterRule {
    /// Hash of the token's bit pattern; roughly uniform load.
    Hash { seed: u64 },
    /// Argmax of a seeded random linear scoring layer. Expert `e` gets a
    /// bias of `-skew * e`, so larger `skew` piles tokens onto low ids.
    ScoreArgmax { seed: u64, skew: f64 },
}

/// Stand-in for a learned top-1 router: a pure function of the token and
/// the rule's seed.
#[derive(Debug, Clone)]
pub struct RouterSim {
    num_experts: usize,
    dim: usize,
    rule: RouterRule,
    scores: Vec<f64>,
}

impl RouterSim {
    pub fn new(num_experts: usize, dim: usize, rule: RouterRule) -> Result<Self> {
        if num_experts == 0 || num_experts > u32::MAX as usize {
            return Err(Error::invalid(format!(
                "unsupported expert count {num_experts}"
            )));
        }
        let scores = match rule {
            RouterRule::Hash { .. } => Vec::new(),
            RouterRule::ScoreArgmax { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = 1.0 / (dim as f64).sqrt();
                (0..num_experts * dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                    .collect()
            }
        };
        Ok(Self {
            num_experts,
            dim,
            rule,
            scores,
        })
    }

    pub fn num_experts(&self) -> usize {
        self.num_experts
    }

    pub fn rule(&self) -> RouterRule {
        self.rule
    }

    pub fn assign(&self, token: &[f64]) -> u32 {
        debug_assert_eq!(token.len(), self.dim);
        match self.rule {
            RouterRule::Hash { seed } => {
                let mut h = splitmix(seed);
                for v in token {
                    h = splitmix(h ^ v.to_bits());
                }
                (h % self.num_experts as u64) as u32
            }
            RouterRule::ScoreArgmax { skew, .. } => {
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for e in 0..self.num_experts {
                    let row = &self.scores[e * self.dim..(e + 1) * self.dim];
                    let s =
                        row.iter().zip(token).map(|(a, b)| a * b).sum::<f64>() - skew * e as f64;
                    if s > best_score {
                        best = e;
                        best_score = s;
                    }
                }
                best as u32
            }
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
