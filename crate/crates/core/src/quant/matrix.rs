use half::bf16;
use serde::{Deserialize, Serialize};

use super::grid::{GridMode, MinMax};
use crate::{Error, Result};

/// Dense row-major weight matrix of a single linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!(
                "weight matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} weight matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weight matrix contains non-finite values"));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// `y = W x` for a single input vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(w, x)| w * x).sum())
            .collect()
    }
}

/// A block of token vectors, one per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenBlock {
    dim: usize,
    data: Vec<f64>,
}

impl TokenBlock {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::shape("token dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::shape(format!(
                "{} values do not split into tokens of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, token: &[f64]) {
        debug_assert_eq!(token.len(), self.dim);
        self.data.extend_from_slice(token);
    }

    /// Applies `w` to every token.
    pub fn transform(&self, w: &WeightMatrix) -> TokenBlock {
        let mut out = TokenBlock::empty(w.rows());
        for t in self.tokens() {
            out.data.extend(w.matvec(t));
        }
        out
    }
}

/// Output of the quantizer: per-element codes plus the per-row grid bounds.
///
/// Ternary codes map `0 -> 0`, `1 -> w_min`, `2 -> w_max`. Two-bit codes
/// index the four ascending levels of [`MinMax::levels`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    pub mode: GridMode,
    pub rows: usize,
    pub cols: usize,
    pub codes: Vec<u8>,
    pub row_minmax: Vec<MinMax>,
}

impl QuantizedMatrix {
    pub fn row_codes(&self, r: usize) -> &[u8] {
        &self.codes[r * self.cols..(r + 1) * self.cols]
    }

    pub fn dequantize(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.codes.len());
        for (r, mm) in self.row_minmax.iter().enumerate() {
            let levels = mm.levels(self.mode);
            out.extend(self.row_codes(r).iter().map(|&c| levels.value(c)));
        }
        out
    }

    pub fn dequantized_matrix(&self) -> WeightMatrix {
        WeightMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.dequantize(),
        }
    }

    /// Fraction of entries that dequantize to exactly zero.
    pub fn zero_fraction(&self) -> f64 {
        if self.codes.is_empty() {
            return 0.0;
        }
        let zeros: usize = self
            .row_minmax
            .iter()
            .enumerate()
            .map(|(r, mm)| {
                let levels = mm.levels(self.mode);
                self.row_codes(r)
                    .iter()
                    .filter(|&&c| levels.value(c) == 0.0)
                    .count()
            })
            .sum();
        zeros as f64 / self.codes.len() as f64
    }

    pub fn into_ternary(self) -> Result<TernaryMatrix> {
        if self.mode != GridMode::Ternary {
            return Err(Error::invalid("only ternary matrices can be converted"));
        }
        TernaryMatrix::new(self.rows, self.cols, self.codes, self.row_minmax)
    }
}

/// Ternary codes `{0, 1, 2}` with per-row `(w_min, w_max)` in bfloat16.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryMatrix {
    rows: usize,
    cols: usize,
    codes: Vec<u8>,
    row_minmax: Vec<MinMax>,
}

impl TernaryMatrix {
    pub fn new(rows: usize, cols: usize, codes: Vec<u8>, row_minmax: Vec<MinMax>) -> Result<Self> {
        if codes.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} ternary matrix needs {} codes, got {}",
                rows * cols,
                codes.len()
            )));
        }
        if row_minmax.len() != rows {
            return Err(Error::shape(format!(
                "expected {rows} min/max pairs, got {}",
                row_minmax.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c > 2) {
            return Err(Error::invalid(format!("ternary code out of range: {bad}")));
        }
        Ok(Self {
            rows,
            cols,
            codes,
            row_minmax,
        })
    }

    /// Matrix with every row's grid set to `(-1, 1)`.
    pub fn with_unit_grid(rows: usize, cols: usize, codes: Vec<u8>) -> Result<Self> {
        let mm = MinMax::new(bf16::NEG_ONE, bf16::ONE);
        Self::new(rows, cols, codes, vec![mm; rows])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn row_codes(&self, r: usize) -> &[u8] {
        &self.codes[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_minmax(&self) -> &[MinMax] {
        &self.row_minmax
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Dequantized value of every entry, row-major.
    pub fn dequantize(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.codes.len());
        for (r, mm) in self.row_minmax.iter().enumerate() {
            let table = [0.0, mm.min.to_f32(), mm.max.to_f32()];
            out.extend(self.row_codes(r).iter().map(|&c| table[c as usize]));
        }
        out
    }
}

impl From<TernaryMatrix> for QuantizedMatrix {
    fn from(t: TernaryMatrix) -> Self {
        QuantizedMatrix {
            mode: GridMode::Ternary,
            rows: t.rows,
            cols: t.cols,
            codes: t.codes,
            row_minmax: t.row_minmax,
        }
    }
}
