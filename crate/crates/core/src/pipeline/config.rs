//! Pipeline configuration, read from TOML:
//!
//! ```toml
//! num_experts = 16
//! group_size = 16        # optional, default 16
//! fast_capacity = 4096   # tokens
//! cap_multiplier = 4.0   # optional, default 4
//! mask_special = true    # optional, default false
//!
//! [router]
//! rule = "score"         # "hash" or "score"
//! seed = 7
//! skew = 0.0             # score rule only, default 0
//! ```

use serde::{Deserialize, Serialize};

use super::block::BlockConfig;
use super::router::{RouterRule, RouterSim};
use crate::quant::DEFAULT_GROUP_SIZE;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterKind {
    Hash,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterConfig {
    pub rule: RouterKind,
    pub seed: u64,
    #[serde(default)]
    pub skew: f64,
}

impl RouterConfig {
    pub fn rule(&self) -> RouterRule {
        match self.rule {
            RouterKind::Hash => RouterRule::Hash { seed: self.seed },
            RouterKind::Score => RouterRule::ScoreArgmax {
                seed: self.seed,
                skew: self.skew,
            },
        }
    }
}

fn default_group_size() -> usize {
    DEFAULT_GROUP_SIZE
}

fn default_cap_multiplier() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub num_experts: usize,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    pub fast_capacity: usize,
    #[serde(default = "default_cap_multiplier")]
    pub cap_multiplier: f64,
    #[serde(default)]
    pub mask_special: bool,
    pub router: RouterConfig,
}

impl PipelineConfig {
    pub fn router(&self, dim: usize) -> Result<RouterSim> {
        RouterSim::new(self.num_experts, dim, self.router.rule())
    }

    pub fn block_config(&self) -> BlockConfig {
        BlockConfig {
            compress: None,
            group_size: self.group_size,
            cap_multiplier: self.cap_multiplier,
            mask_special: self.mask_special,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            "num_experts = 8\nfast_capacity = 100\n[router]\nrule = \"hash\"\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.group_size, 16);
        assert_eq!(cfg.cap_multiplier, 4.0);
        assert!(!cfg.mask_special);
        assert_eq!(cfg.router.rule(), RouterRule::Hash { seed: 3 });
    }

    #[test]
    fn rejects_unknown_keys() {
        let r: std::result::Result<PipelineConfig, _> = toml::from_str(
            "num_experts = 8\nfast_capacity = 100\nbogus = 1\n[router]\nrule = \"hash\"\nseed = 3\n",
        );
        assert!(r.is_err());
    }
}
