use half::bf16;
use serde::{Deserialize, Serialize};

use super::matrix::{QuantizedMatrix, WeightMatrix};

/// Quantization grid family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Three levels `{w_min, 0, w_max}`.
    Ternary,
    /// Four equally spaced levels with step `(w_max - w_min) / 3`, shifted
    /// by an integer zero point so that 0 is always one of them.
    TwoBit,
}

impl GridMode {
    pub fn num_levels(self) -> usize {
        match self {
            GridMode::Ternary => 3,
            GridMode::TwoBit => 4,
        }
    }
}

/// Per-row grid bounds, stored the way the compressed format stores them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: bf16,
    pub max: bf16,
}

impl MinMax {
    pub fn new(min: bf16, max: bf16) -> Self {
        Self { min, max }
    }

    /// Bounds of a weight row, widened to include 0.
    pub fn from_row(row: &[f64]) -> Self {
        let (lo, hi) = row
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Self {
            min: bf16::from_f64(lo),
            max: bf16::from_f64(hi),
        }
    }

    pub fn levels(&self, mode: GridMode) -> Levels {
        let lo = self.min.to_f64();
        let hi = self.max.to_f64();
        match mode {
            GridMode::Ternary => Levels {
                values: [0.0, lo, hi, 0.0],
                len: 3,
            },
            GridMode::TwoBit => {
                let step = (hi - lo) / 3.0;
                let mut values = [0.0; 4];
                if step > 0.0 {
                    let zero = (-lo / step).round();
                    for (k, v) in values.iter_mut().enumerate() {
                        *v = step * (k as f64 - zero);
                    }
                }
                Levels { values, len: 4 }
            }
        }
    }
}

/// The dequantization levels of one row, indexed by code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levels {
    values: [f64; 4],
    len: u8,
}

impl Levels {
    pub fn value(&self, code: u8) -> f64 {
        debug_assert!(code < self.len);
        self.values[code as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len as usize]
    }

    /// Code of the level closest to `v`. Ties go to the level of smaller
    /// magnitude, then to the lower code.
    pub fn nearest(&self, v: f64) -> u8 {
        let mut best = 0u8;
        let mut best_dist = f64::INFINITY;
        let mut best_mag = f64::INFINITY;
        for (code, &level) in self.as_slice().iter().enumerate() {
            let dist = (v - level).abs();
            let mag = level.abs();
            if dist < best_dist || (dist == best_dist && mag < best_mag) {
                best = code as u8;
                best_dist = dist;
                best_mag = mag;
            }
        }
        best
    }
}

/// Row-wise grids for a whole matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGrid {
    pub mode: GridMode,
    pub rows: Vec<MinMax>,
}

impl QuantGrid {
    pub fn levels(&self, row: usize) -> Levels {
        self.rows[row].levels(self.mode)
    }
}

pub fn make_grid(w: &WeightMatrix, mode: GridMode) -> QuantGrid {
    QuantGrid {
        mode,
        rows: (0..w.rows()).map(|r| MinMax::from_row(w.row(r))).collect(),
    }
}

/// Round-to-nearest quantization of `w` onto `grid`.
pub fn rtn_quantize(w: &WeightMatrix, grid: &QuantGrid) -> QuantizedMatrix {
    assert_eq!(grid.rows.len(), w.rows(), "grid does not match weight rows");
    let mut codes = Vec::with_capacity(w.values().len());
    for r in 0..w.rows() {
        let levels = grid.levels(r);
        codes.extend(w.row(r).iter().map(|&v| levels.nearest(v)));
    }
    QuantizedMatrix {
        mode: grid.mode,
        rows: w.rows(),
        cols: w.cols(),
        codes,
        row_minmax: grid.rows.clone(),
    }
}
