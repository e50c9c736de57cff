//! Sub-1-bit compression for mixture-of-experts weight matrices.
//!
//! The crate is split along the compression pipeline:
//!
//! - [`quant`]: row-wise ternary / 2-bit grids, round-to-nearest and a
//!   batched GPTQ solver for groups of experts.
//! - [`pipeline`]: list buffer, two-tier activation offloading, routing and
//!   token capping used to drive calibration at layer granularity.
//! - [`dict`]: the shared 2^16-entry fixed-to-variable decoding dictionary.
//! - [`codec`]: encoding into the packed codeword format, decompression and
//!   the fused decompress + matrix-vector product.
//! - [`stats`]: sparsity, achieved compression rate and entropy bounds.

pub mod codec;
pub mod dict;
pub mod error;
pub mod pipeline;
pub mod quant;
pub mod stats;

pub use error::{Error, Result};
pub use half::bf16;
