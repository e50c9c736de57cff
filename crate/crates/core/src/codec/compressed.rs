use crate::dict::Dictionary;
use crate::quant::MinMax;
use crate::{Error, Result};

/// A ternary matrix in the packed codeword format.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub codewords: Vec<u16>,
    /// `rows + 1` offsets into `codewords`; row `r` spans
    /// `row_off[r]..row_off[r + 1]`.
    pub row_off: Vec<u32>,
    pub row_minmax: Vec<MinMax>,
    pub dict_hash: u64,
}

impl CompressedMatrix {
    pub fn row_codewords(&self, r: usize) -> &[u16] {
        &self.codewords[self.row_off[r] as usize..self.row_off[r + 1] as usize]
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Checks the offset table against the codeword stream.
    pub fn check_layout(&self) -> Result<()> {
        if !self.cols.is_multiple_of(2) {
            return Err(Error::corrupt(format!("odd column count {}", self.cols)));
        }
        if self.row_off.len() != self.rows + 1 {
            return Err(Error::corrupt(format!(
                "{} row offsets for {} rows",
                self.row_off.len(),
                self.rows
            )));
        }
        if self.row_minmax.len() != self.rows {
            return Err(Error::corrupt(format!(
                "{} min/max pairs for {} rows",
                self.row_minmax.len(),
                self.rows
            )));
        }
        if self.row_off[0] != 0 {
            return Err(Error::corrupt("first row offset is not zero"));
        }
        if self.row_off.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::corrupt("row offsets decrease"));
        }
        let end = self.row_off[self.rows] as usize;
        if end > self.codewords.len() {
            return Err(Error::corrupt(format!(
                "codeword stream truncated: offsets need {end}, have {}",
                self.codewords.len()
            )));
        }
        if end < self.codewords.len() {
            return Err(Error::corrupt(format!(
                "{} codewords past the last row",
                self.codewords.len() - end
            )));
        }
        Ok(())
    }

    pub fn check_dictionary(&self, dict: &Dictionary) -> Result<()> {
        if self.dict_hash != dict.hash() {
            return Err(Error::DictionaryMismatch {
                expected: self.dict_hash,
                found: dict.hash(),
            });
        }
        Ok(())
    }
}
