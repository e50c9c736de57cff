//! Layer-at-a-time calibration with offloaded activations.
//!
//! All token hidden states live in one [`ListBuffer`] in the bulk tier.
//! A block runs in two phases. The dense phase streams samples through the
//! fast tier, applies the dense layers and records expert assignments. The
//! sparse phase then gathers the tokens of each expert, compresses the
//! expert from them, runs them through the compressed expert and scatters
//! the outputs back. Every token crosses between the tiers twice in each
//! direction per block.

mod block;
mod config;
mod dense;
mod list_buffer;
mod router;
mod tier;

pub use block::{
    cap_tokens, run_block, token_cap, BlockConfig, BlockReport, CapPlan, CompressSettings,
    CompressedExpert, QuantMethod,
};
pub use config::{PipelineConfig, RouterConfig, RouterKind};
pub use dense::{DenseLayer, IdentityDense, RandomDense};
pub use list_buffer::{Gathered, ListBuffer};
pub use router::{RouterRule, RouterSim};
pub use tier::{Staged, TierStore, TransferCounters};
