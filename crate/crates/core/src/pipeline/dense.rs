use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::quant::{TokenBlock, WeightMatrix};

/// The dense (non-expert) part of a block, applied to one whole sample.
pub trait DenseLayer: Sync {
    fn forward(&self, sample: &TokenBlock) -> TokenBlock;
}

impl<F> DenseLayer for F
where
    F: Fn(&TokenBlock) -> TokenBlock + Sync,
{
    fn forward(&self, sample: &TokenBlock) -> TokenBlock {
        self(sample)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDense;

impl DenseLayer for IdentityDense {
    fn forward(&self, sample: &TokenBlock) -> TokenBlock {
        sample.clone()
    }
}

/// `tanh(W x)` with a fixed seeded Gaussian `W` scaled by `1/sqrt(dim)`.
/// Outputs stay in `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct RandomDense {
    weights: WeightMatrix,
}

impl RandomDense {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let values = (0..dim * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Self {
            weights: WeightMatrix::new(dim, dim, values).expect("finite square matrix"),
        }
    }
}

impl DenseLayer for RandomDense {
    fn forward(&self, sample: &TokenBlock) -> TokenBlock {
        let y = sample.transform(&self.weights);
        TokenBlock::new(y.dim(), y.data().iter().map(|v| v.tanh()).collect()).expect("same shape")
    }
}
