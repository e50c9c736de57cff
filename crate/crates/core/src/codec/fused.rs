use std::ops::Range;

use half::bf16;
use rayon::prelude::*;

use super::compressed::CompressedMatrix;
use super::warp::{warp_reduce, WARP_SIZE};
use crate::dict::Dictionary;
use crate::quant::{MinMax, TernaryMatrix};
use crate::{Error, Result};

/// Dot product of one compressed row with `x`, accumulated the way a warp
/// does it: value slot `i` of every symbol goes to lane `i`, and the 32
/// lane partial sums are combined by a shuffle-down tree.
pub(crate) fn row_dot(
    codewords: &[u16],
    cols: usize,
    mm: MinMax,
    x: &[f32],
    dict: &Dictionary,
) -> Result<f32> {
    let deq = [0.0f32, mm.min.to_f32(), mm.max.to_f32()];
    let mut lanes = [0.0f32; WARP_SIZE];
    let mut idx = 0usize;
    for &cw in codewords {
        let w = dict.decode_words(cw);
        let n = w.value_count();
        if idx + n > cols {
            return Err(Error::corrupt(format!(
                "row decodes past its {cols} columns"
            )));
        }
        let xs = &x[idx..idx + n];
        for (lane, (acc, &xv)) in lanes.iter_mut().zip(xs).enumerate() {
            *acc += deq[w.value(lane) as usize] * xv;
        }
        idx += n;
    }
    if idx != cols {
        return Err(Error::corrupt(format!(
            "row decodes to {idx} values, expected {cols}"
        )));
    }
    Ok(warp_reduce(lanes))
}

fn accumulate(y: &mut bf16, res: f32) {
    *y = bf16::from_f32(y.to_f32() + bf16::from_f32(res).to_f32());
}

fn check_shapes(c: &CompressedMatrix, x: &[f32], dict: &Dictionary) -> Result<()> {
    c.check_dictionary(dict)?;
    c.check_layout()?;
    if x.len() != c.cols {
        return Err(Error::shape(format!(
            "input has {} entries, matrix has {} columns",
            x.len(),
            c.cols
        )));
    }
    Ok(())
}

/// `y += W x` straight from the compressed stream.
///
/// Products and per-row sums are `f32`; each row result is rounded to
/// bfloat16 once and added onto `y[r]`.
pub fn fused_matvec(
    c: &CompressedMatrix,
    x: &[f32],
    dict: &Dictionary,
    y: &mut [bf16],
) -> Result<()> {
    check_shapes(c, x, dict)?;
    if y.len() != c.rows {
        return Err(Error::shape(format!(
            "output has {} entries, matrix has {} rows",
            y.len(),
            c.rows
        )));
    }
    y.par_iter_mut().enumerate().try_for_each(|(r, yr)| {
        let res = row_dot(c.row_codewords(r), c.cols, c.row_minmax[r], x, dict)?;
        accumulate(yr, res);
        Ok(())
    })
}

/// [`fused_matvec`] restricted to `rows`; `y` holds just those rows. Lets
/// callers split a matrix across workers without sharing an output buffer.
pub fn fused_matvec_rows(
    c: &CompressedMatrix,
    rows: Range<usize>,
    x: &[f32],
    dict: &Dictionary,
    y: &mut [bf16],
) -> Result<()> {
    check_shapes(c, x, dict)?;
    if rows.end > c.rows || y.len() != rows.len() {
        return Err(Error::shape(format!(
            "row range {rows:?} does not fit output of {}",
            y.len()
        )));
    }
    for (r, yr) in rows.zip(y.iter_mut()) {
        let res = row_dot(c.row_codewords(r), c.cols, c.row_minmax[r], x, dict)?;
        accumulate(yr, res);
    }
    Ok(())
}

/// Reference product on the dequantized matrix, in `f64`.
pub fn dense_matvec(t: &TernaryMatrix, x: &[f32]) -> Vec<f64> {
    let deq = t.dequantize();
    (0..t.rows())
        .map(|r| {
            deq[r * t.cols()..(r + 1) * t.cols()]
                .iter()
                .zip(x)
                .map(|(&w, &x)| w as f64 * x as f64)
                .sum()
        })
        .collect()
}
