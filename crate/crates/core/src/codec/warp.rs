//! Lane-level replay of the fused decode kernel for one row.
//!
//! One warp owns a row. Codewords are staged 32 at a time; for every
//! symbol, lanes `0..28` each read decode word `lane / 14` and extract value
//! slot `lane % 14`, then all lanes advance the input offset by twice the
//! pair count. Lanes 28 to 31 never extract.

use super::compressed::CompressedMatrix;
use super::decode::decode_row;
use crate::dict::Dictionary;
use crate::{Error, Result};

pub const WARP_SIZE: usize = 32;
/// Lanes that take part in value extraction.
pub const ACTIVE_LANES: usize = 28;

/// One processed codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolStep {
    pub codeword: u16,
    pub pair_count: usize,
    /// Input offset (`idx`) before this symbol.
    pub value_offset: usize,
    /// Offset advance, `2 * pair_count`.
    pub advance: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpTrace {
    pub row: usize,
    /// Codewords staged by each coalesced block fetch.
    pub block_fetches: Vec<usize>,
    pub steps: Vec<SymbolStep>,
    /// Symbols for which each lane ran the extraction body.
    pub lane_active: [usize; WARP_SIZE],
    /// Symbols for which each lane's slot held a real (non-padding) value.
    pub lane_extractions: [usize; WARP_SIZE],
    /// Values extracted by the lanes, in row order.
    pub values: Vec<u8>,
    /// Warp-reduced dot product, when an input vector was supplied.
    pub result: Option<f32>,
}

/// Shuffle-down tree reduction; lane 0 ends up with the total.
pub(crate) fn warp_reduce(mut res: [f32; WARP_SIZE]) -> f32 {
    let mut offset = WARP_SIZE / 2;
    while offset > 0 {
        let prev = res;
        for (lane, r) in res.iter_mut().enumerate() {
            let src = if lane + offset < WARP_SIZE {
                prev[lane + offset]
            } else {
                prev[lane]
            };
            *r = prev[lane] + src;
        }
        offset /= 2;
    }
    res[0]
}

pub fn simulate_warp_row(c: &CompressedMatrix, row: usize, dict: &Dictionary) -> Result<WarpTrace> {
    run(c, row, dict, None)
}

/// Like [`simulate_warp_row`], also accumulating `x` through every lane.
pub fn simulate_warp_matvec(
    c: &CompressedMatrix,
    row: usize,
    dict: &Dictionary,
    x: &[f32],
) -> Result<WarpTrace> {
    if x.len() != c.cols {
        return Err(Error::shape(format!(
            "input has {} entries, matrix has {} columns",
            x.len(),
            c.cols
        )));
    }
    run(c, row, dict, Some(x))
}

fn run(
    c: &CompressedMatrix,
    row: usize,
    dict: &Dictionary,
    x: Option<&[f32]>,
) -> Result<WarpTrace> {
    c.check_dictionary(dict)?;
    c.check_layout()?;
    if row >= c.rows {
        return Err(Error::shape(format!(
            "row {row} out of range for {} rows",
            c.rows
        )));
    }
    let cols = c.cols;
    let mm = c.row_minmax[row];
    let deq = [0.0f32, mm.min.to_f32(), mm.max.to_f32()];
    // Shared input copy, padded so the last symbol's idle slots stay in range.
    let x_shared: Option<Vec<f32>> = x.map(|x| {
        let mut v = x.to_vec();
        v.resize(cols + ACTIVE_LANES, 0.0);
        v
    });

    let mut trace = WarpTrace {
        row,
        block_fetches: Vec::new(),
        steps: Vec::new(),
        lane_active: [0; WARP_SIZE],
        lane_extractions: [0; WARP_SIZE],
        values: vec![0; cols],
        result: None,
    };
    let mut res = [0.0f32; WARP_SIZE];
    let mut idx = 0usize;

    for block in c.row_codewords(row).chunks(WARP_SIZE) {
        trace.block_fetches.push(block.len());
        for &enc in block {
            let w = dict.decode_words(enc);
            let advance = w.value_count();
            if idx + advance > cols {
                return Err(Error::corrupt(format!(
                    "row {row} decodes past its {cols} columns"
                )));
            }
            for lane in 0..ACTIVE_LANES {
                trace.lane_active[lane] += 1;
                let ter = w.value(lane);
                if lane < advance {
                    trace.lane_extractions[lane] += 1;
                    trace.values[idx + lane] = ter;
                } else if ter != 0 {
                    return Err(Error::corrupt(format!(
                        "codeword {enc} has non-zero padding"
                    )));
                }
                if let Some(xs) = &x_shared {
                    res[lane] += deq[ter as usize] * xs[idx + lane];
                }
            }
            trace.steps.push(SymbolStep {
                codeword: enc,
                pair_count: w.pair_count(),
                value_offset: idx,
                advance,
            });
            idx += advance;
        }
    }
    if idx != cols {
        return Err(Error::corrupt(format!(
            "row {row} decodes to {idx} values, expected {cols}"
        )));
    }

    let mut expected = Vec::with_capacity(cols);
    decode_row(c.row_codewords(row), cols, dict, &mut expected)?;
    if expected != trace.values {
        return Err(Error::corrupt(format!(
            "warp extraction of row {row} disagrees with decoding"
        )));
    }
    if x_shared.is_some() {
        trace.result = Some(warp_reduce(res));
    }
    Ok(trace)
}
