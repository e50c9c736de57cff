//! Weight quantization: row-wise grids, round-to-nearest and batched GPTQ.

mod gptq;
mod grid;
mod hessian;
mod matrix;

pub use gptq::{
    gptq_quantize, gptq_quantize_one, objective, ExpertGroup, FallbackReason, GroupSolution,
    SolveOutcome, DEFAULT_DAMPING, DEFAULT_GROUP_SIZE, LAZY_BLOCK_SIZE,
};
pub use grid::{make_grid, rtn_quantize, GridMode, Levels, MinMax, QuantGrid};
pub use hessian::{accumulate_hessian, Hessian};
pub use matrix::{QuantizedMatrix, TernaryMatrix, TokenBlock, WeightMatrix};
