use std::ops::Range;

use crate::quant::TokenBlock;
use crate::{Error, Result};

/// Contiguous store of all token hidden states with sample delimiters.
///
/// `delimiters` starts at 0 and ends at the token count; sample `i` spans
/// `delimiters[i]..delimiters[i + 1]`. Each token also carries its expert
/// assignment and whether it is a special (mask) token.
#[derive(Debug, Clone, PartialEq)]
pub struct ListBuffer {
    dim: usize,
    tokens: Vec<f64>,
    delimiters: Vec<usize>,
    assignments: Vec<Option<u32>>,
    special: Vec<bool>,
}

/// Tokens of one expert, in buffer order, with their buffer positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Gathered {
    pub positions: Vec<usize>,
    pub tokens: TokenBlock,
    pub special: Vec<bool>,
}

impl ListBuffer {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::shape("token dimension must be positive"));
        }
        Ok(Self {
            dim,
            tokens: Vec::new(),
            delimiters: vec![0],
            assignments: Vec::new(),
            special: Vec::new(),
        })
    }

    pub fn append_sample(&mut self, sample: &TokenBlock) -> Result<()> {
        self.append_sample_masked(sample, &vec![false; sample.len()])
    }

    /// Appends a sample whose tokens flagged in `special` are excluded from
    /// Hessian accumulation when masking is enabled.
    pub fn append_sample_masked(&mut self, sample: &TokenBlock, special: &[bool]) -> Result<()> {
        if sample.dim() != self.dim {
            return Err(Error::shape(format!(
                "sample tokens have dimension {}, buffer holds {}",
                sample.dim(),
                self.dim
            )));
        }
        if sample.is_empty() {
            return Err(Error::invalid("samples must contain at least one token"));
        }
        if special.len() != sample.len() {
            return Err(Error::shape("special-token flags do not match the sample"));
        }
        self.tokens.extend_from_slice(sample.data());
        self.assignments
            .extend(std::iter::repeat_n(None, sample.len()));
        self.special.extend_from_slice(special);
        self.delimiters.push(self.num_tokens());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len() / self.dim
    }

    pub fn num_samples(&self) -> usize {
        self.delimiters.len() - 1
    }

    pub fn delimiters(&self) -> &[usize] {
        &self.delimiters
    }

    pub fn sample_range(&self, i: usize) -> Range<usize> {
        self.delimiters[i]..self.delimiters[i + 1]
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.tokens[i * self.dim..(i + 1) * self.dim]
    }

    pub fn assignments(&self) -> &[Option<u32>] {
        &self.assignments
    }

    pub fn special(&self) -> &[bool] {
        &self.special
    }

    pub fn set_assignment(&mut self, token: usize, expert: u32) {
        self.assignments[token] = Some(expert);
    }

    /// Positions of all tokens routed to `expert`, in buffer order.
    pub fn expert_positions(&self, expert: u32) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(expert))
            .map(|(i, _)| i)
            .collect()
    }

    /// Tokens per expert for experts `0..num_experts`.
    pub fn expert_counts(&self, num_experts: usize) -> Vec<usize> {
        let mut counts = vec![0; num_experts];
        for e in self.assignments.iter().flatten() {
            if let Some(c) = counts.get_mut(*e as usize) {
                *c += 1;
            }
        }
        counts
    }

    /// Copies the tokens at `positions` into a block.
    pub fn collect(&self, positions: &[usize]) -> Gathered {
        let mut tokens = TokenBlock::empty(self.dim);
        for &p in positions {
            tokens.push(self.token(p));
        }
        Gathered {
            positions: positions.to_vec(),
            tokens,
            special: positions.iter().map(|&p| self.special[p]).collect(),
        }
    }

    pub fn gather_expert_tokens(&self, expert: u32) -> Gathered {
        self.collect(&self.expert_positions(expert))
    }

    /// Overwrites the tokens at `positions` with `outputs`, row by row.
    pub fn scatter_expert_outputs(
        &mut self,
        positions: &[usize],
        outputs: &TokenBlock,
    ) -> Result<()> {
        if outputs.len() != positions.len() {
            return Err(Error::shape(format!(
                "{} outputs for {} positions",
                outputs.len(),
                positions.len()
            )));
        }
        if !outputs.is_empty() && outputs.dim() != self.dim {
            return Err(Error::shape(format!(
                "outputs have dimension {}, buffer holds {}",
                outputs.dim(),
                self.dim
            )));
        }
        if let Some(&p) = positions.iter().find(|&&p| p >= self.num_tokens()) {
            return Err(Error::shape(format!("position {p} outside the buffer")));
        }
        for (&p, t) in positions.iter().zip(outputs.tokens()) {
            self.tokens[p * self.dim..(p + 1) * self.dim].copy_from_slice(t);
        }
        Ok(())
    }
}
