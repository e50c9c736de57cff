use rayon::prelude::*;

use super::compressed::CompressedMatrix;
use crate::dict::Dictionary;
use crate::quant::TernaryMatrix;
use crate::{Error, Result};

/// Expands one row's codewords into exactly `cols` ternary values.
pub fn decode_row(
    codewords: &[u16],
    cols: usize,
    dict: &Dictionary,
    out: &mut Vec<u8>,
) -> Result<()> {
    let start = out.len();
    for &cw in codewords {
        let w = dict.decode_words(cw);
        let n = w.value_count();
        if out.len() - start + n > cols {
            return Err(Error::corrupt(format!(
                "row decodes past its {cols} columns"
            )));
        }
        out.extend((0..n).map(|i| w.value(i)));
    }
    if out.len() - start != cols {
        return Err(Error::corrupt(format!(
            "row decodes to {} values, expected {cols}",
            out.len() - start
        )));
    }
    Ok(())
}

/// Exact inverse of [`super::encode`].
pub fn decompress(c: &CompressedMatrix, dict: &Dictionary) -> Result<TernaryMatrix> {
    c.check_dictionary(dict)?;
    c.check_layout()?;
    let rows: Vec<Vec<u8>> = (0..c.rows)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(c.cols);
            decode_row(c.row_codewords(r), c.cols, dict, &mut out).map(|_| out)
        })
        .collect::<Result<_>>()?;
    TernaryMatrix::new(c.rows, c.cols, rows.concat(), c.row_minmax.clone())
}
