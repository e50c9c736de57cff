//! Sparsity, compression rate and entropy bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::CompressedMatrix;
use crate::dict::PairDistribution;
use crate::quant::TernaryMatrix;
use crate::{Error, Result};

/// Bits of the uncompressed bfloat16 weights.
pub const ORIGINAL_BITS_PER_VALUE: u64 = 16;
const OFFSET_BITS: u64 = 32;
const MINMAX_BITS: u64 = 32;

/// Storage accounting of one compressed matrix. The shared dictionary is
/// amortized over all matrices and not charged here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub elements: u64,
    /// Codeword stream.
    pub payload_bits: u64,
    /// Row offsets (`rows + 1` x 32 bits) plus row min/max (`rows` x 32 bits).
    pub metadata_bits: u64,
    pub original_bits: u64,
    /// Compression rate relative to bfloat16, counting only the compressed
    /// expert matrices.
    pub moe_only_rate: f64,
    pub bits_per_parameter: f64,
}

impl RateReport {
    pub fn compressed_bits(&self) -> u64 {
        self.payload_bits + self.metadata_bits
    }

    /// Human-readable, one field per line.
    pub fn to_text(&self) -> String {
        format!(
            "elements:           {}\n\
             payload bits:       {}\n\
             metadata bits:      {}\n\
             original bits:      {}\n\
             rate (moe-only):    {:.2}x\n\
             bits per parameter: {:.4}\n\
             (shared dictionary not included)\n",
            self.elements,
            self.payload_bits,
            self.metadata_bits,
            self.original_bits,
            self.moe_only_rate,
            self.bits_per_parameter
        )
    }

    /// Sums reports of several matrices into one.
    pub fn combine(reports: &[RateReport]) -> RateReport {
        let elements = reports.iter().map(|r| r.elements).sum();
        let payload = reports.iter().map(|r| r.payload_bits).sum();
        let metadata = reports.iter().map(|r| r.metadata_bits).sum();
        Self::from_bits(elements, payload, metadata)
    }

    fn from_bits(elements: u64, payload_bits: u64, metadata_bits: u64) -> RateReport {
        let bits_per_parameter = (payload_bits + metadata_bits) as f64 / elements as f64;
        RateReport {
            elements,
            payload_bits,
            metadata_bits,
            original_bits: ORIGINAL_BITS_PER_VALUE * elements,
            moe_only_rate: ORIGINAL_BITS_PER_VALUE as f64 / bits_per_parameter,
            bits_per_parameter,
        }
    }
}

/// Fraction of code-0 entries.
pub fn natural_sparsity(t: &TernaryMatrix) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::invalid("sparsity of an empty matrix"));
    }
    let zeros = t.codes().iter().filter(|&&c| c == 0).count();
    Ok(zeros as f64 / t.codes().len() as f64)
}

/// I.i.d. ternary matrix drawn from `dist`, with a `(-1, 1)` grid on every
/// row. Deterministic in `seed`.
pub fn sample_ternary(
    dist: &PairDistribution,
    rows: usize,
    cols: usize,
    seed: u64,
) -> TernaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = dist.p0();
    let p1 = p0 + dist.p_nonzero();
    let codes = (0..rows * cols)
        .map(|_| {
            let u: f64 = rng.random();
            if u < p0 {
                0
            } else if u < p1 {
                1
            } else {
                2
            }
        })
        .collect();
    TernaryMatrix::with_unit_grid(rows, cols, codes).expect("codes are ternary")
}

pub fn compression_rate(c: &CompressedMatrix) -> RateReport {
    let rows = c.rows as u64;
    RateReport::from_bits(
        c.elements() as u64,
        16 * c.codewords.len() as u64,
        OFFSET_BITS * (rows + 1) + MINMAX_BITS * rows,
    )
}

/// Best rate any lossless code can reach on i.i.d. data from `dist`:
/// 16 bits over the per-value Shannon entropy.
pub fn theoretical_limit(dist: &PairDistribution) -> Result<f64> {
    let p0 = dist.p0();
    if p0 <= 0.0 || p0 >= 1.0 {
        return Err(Error::InvalidDistribution(p0));
    }
    Ok(ORIGINAL_BITS_PER_VALUE as f64 / dist.entropy_bits())
}
