//! Configuration of a `compress` run:
//!
//! ```toml
//! max_fallback_fraction = 0.5   # optional; exit code 3 above this
//!
//! [pipeline]
//! num_experts = 16
//! fast_capacity = 4096
//! [pipeline.router]
//! rule = "score"
//! seed = 7
//!
//! [synthetic]
//! dim = 64                  # even; experts are dim x dim
//! layers = 1                # optional
//! samples = 64
//! tokens_per_sample = 32
//! weight_scale = 0.02       # optional, std-dev of expert weights
//! mask_rate = 0.0           # optional, fraction of special tokens
//! seed = 1
//! ```

use anyhow::{bail, Result};
use qmoe::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::{Bits, Method};

fn default_max_fallback() -> f64 {
    0.5
}

fn default_layers() -> usize {
    1
}

fn default_weight_scale() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_max_fallback")]
    pub max_fallback_fraction: f64,
    pub pipeline: PipelineConfig,
    pub synthetic: SyntheticConfig,
}

/// Gaussian stand-in for a real checkpoint and calibration set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    pub samples: usize,
    pub tokens_per_sample: usize,
    #[serde(default = "default_weight_scale")]
    pub weight_scale: f64,
    #[serde(default)]
    pub mask_rate: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.synthetic;
        if s.dim == 0 || !s.dim.is_multiple_of(2) {
            bail!("synthetic.dim must be even and positive, got {}", s.dim);
        }
        if s.layers == 0 || s.samples == 0 || s.tokens_per_sample == 0 {
            bail!("synthetic.layers, samples and tokens_per_sample must be positive");
        }
        if s.tokens_per_sample > self.pipeline.fast_capacity {
            bail!(
                "a sample of {} tokens does not fit the fast tier of {}",
                s.tokens_per_sample,
                self.pipeline.fast_capacity
            );
        }
        if !(s.weight_scale > 0.0 && s.weight_scale.is_finite()) {
            bail!("synthetic.weight_scale must be positive");
        }
        if !(0.0..1.0).contains(&s.mask_rate) {
            bail!("synthetic.mask_rate must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.max_fallback_fraction) {
            bail!("max_fallback_fraction must lie in [0, 1]");
        }
        if self.pipeline.num_experts == 0 || self.pipeline.group_size == 0 {
            bail!("pipeline.num_experts and group_size must be positive");
        }
        Ok(())
    }
}

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub method: Method,
    pub bits: Bits,
    /// Hex, since TOML integers are signed 64-bit.
    pub dictionary_hash: String,
    pub dictionary_p0: f64,
    pub config: &'a RunConfig,
}
