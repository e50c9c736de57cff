use nalgebra::DMatrix;

use super::matrix::TokenBlock;
use crate::{Error, Result};

/// Layer-wise Hessian `X Xᵀ` of the calibration inputs of one linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    dim: usize,
    entries: Vec<f64>,
    tokens: usize,
}

impl Hessian {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self {
            dim,
            entries,
            tokens: dim,
        }
    }

    /// Builds a Hessian from explicit entries; `tokens` is the number of
    /// calibration tokens it summarises.
    pub fn from_entries(dim: usize, entries: Vec<f64>, tokens: usize) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::shape(format!(
                "{dim}x{dim} Hessian needs {} entries",
                dim * dim
            )));
        }
        Ok(Self {
            dim,
            entries,
            tokens,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn token_count(&self) -> usize {
        self.tokens
    }

    /// No tokens contributed; GPTQ cannot use this Hessian.
    pub fn is_empty(&self) -> bool {
        self.tokens == 0
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

/// Sums `x xᵀ` over every token whose `mask` entry is `false`.
///
/// Masked tokens are dropped before the product so that adding them never
/// changes the result. An empty or fully masked block yields a zero
/// Hessian with [`Hessian::is_empty`] set.
pub fn accumulate_hessian(x: &TokenBlock, mask: Option<&[bool]>) -> Result<Hessian> {
    let dim = x.dim();
    if let Some(mask) = mask {
        if mask.len() != x.len() {
            return Err(Error::shape(format!(
                "mask has {} entries for {} tokens",
                mask.len(),
                x.len()
            )));
        }
    }
    let kept: Vec<&[f64]> = x
        .tokens()
        .enumerate()
        .filter(|(i, _)| !mask.is_some_and(|m| m[*i]))
        .map(|(_, t)| t)
        .collect();
    if kept.is_empty() {
        return Ok(Hessian {
            dim,
            entries: vec![0.0; dim * dim],
            tokens: 0,
        });
    }
    let xs = DMatrix::from_fn(kept.len(), dim, |i, j| kept[i][j]);
    let h = xs.tr_mul(&xs);
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            entries.push(h[(i, j)]);
        }
    }
    Ok(Hessian {
        dim,
        entries,
        tokens: kept.len(),
    })
}
