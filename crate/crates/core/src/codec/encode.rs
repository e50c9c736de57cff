use rayon::prelude::*;

use super::compressed::CompressedMatrix;
use crate::dict::{pair_symbol, Dictionary};
use crate::quant::TernaryMatrix;
use crate::{Error, Result};

/// Greedy longest-prefix encoding of one row of ternary codes.
pub fn encode_row(codes: &[u8], dict: &Dictionary, out: &mut Vec<u16>) {
    debug_assert!(codes.len().is_multiple_of(2));
    let pairs: Vec<u8> = codes
        .chunks_exact(2)
        .map(|p| pair_symbol(p[0], p[1]))
        .collect();
    let mut pos = 0;
    while pos < pairs.len() {
        let (cw, n) = dict.longest_prefix(&pairs, pos);
        out.push(cw);
        pos += n;
    }
}

/// Encodes every row independently and packs the rows back to back.
///
/// The format works on pairs, so `cols` must be even; pad with zero
/// columns (and zero inputs) otherwise.
pub fn encode(t: &TernaryMatrix, dict: &Dictionary) -> Result<CompressedMatrix> {
    if !t.cols().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "column count {} is odd; pad to an even width",
            t.cols()
        )));
    }
    let rows: Vec<Vec<u16>> = (0..t.rows())
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::new();
            encode_row(t.row_codes(r), dict, &mut out);
            out
        })
        .collect();

    let total: usize = rows.iter().map(Vec::len).sum();
    if total > u32::MAX as usize {
        return Err(Error::invalid("codeword stream exceeds 32-bit row offsets"));
    }
    let mut codewords = Vec::with_capacity(total);
    let mut row_off = Vec::with_capacity(t.rows() + 1);
    row_off.push(0u32);
    for r in rows {
        codewords.extend_from_slice(&r);
        row_off.push(codewords.len() as u32);
    }
    Ok(CompressedMatrix {
        rows: t.rows(),
        cols: t.cols(),
        codewords,
        row_off,
        row_minmax: t.row_minmax().to_vec(),
        dict_hash: dict.hash(),
    })
}
