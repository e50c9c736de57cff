//! Packed sub-1-bit matrix format.
//!
//! Each row of a ternary matrix is encoded on its own as a run of 16-bit
//! codewords; rows are stored back to back with a `row_off` index. Decoding
//! is available as plain decompression, as a fused decompress + matvec,
//! and as a lane-level replay of the warp schedule used on GPUs.

mod compressed;
mod container;
mod decode;
mod encode;
mod fused;
mod warp;

pub use compressed::CompressedMatrix;
pub use container::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use decode::{decode_row, decompress};
pub use encode::{encode, encode_row};
pub use fused::{dense_matvec, fused_matvec, fused_matvec_rows};
pub use warp::{
    simulate_warp_matvec, simulate_warp_row, SymbolStep, WarpTrace, ACTIVE_LANES, WARP_SIZE,
};
